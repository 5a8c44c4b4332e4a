use alloc::vec::Vec;
use core::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::dataset::{ApplianceKind, Corpus};
use crate::features::{enumerate_subsets, FeatureSubset};
use crate::neighbors::DistanceKind;
use crate::{Error, Result};

use super::loocv::LoocvContext;
use super::metric::MetricConfig;

/// The (K, feature subset, distance) grid evaluated for one appliance.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub appliance: ApplianceKind,
    /// Ascending.
    pub ks: Vec<usize>,
    /// Reporting order (fewer units first).
    pub subsets: Vec<FeatureSubset>,
    /// Euclidean first.
    pub distances: Vec<DistanceKind>,
}

impl SweepPlan {
    pub fn new(
        appliance: ApplianceKind,
        k_range: RangeInclusive<usize>,
        distances: &[DistanceKind],
        corpus_len: usize,
    ) -> Result<Self> {
        let (lo, hi) = (*k_range.start(), *k_range.end());
        if lo == 0 || lo > hi || hi + 1 > corpus_len {
            return Err(Error::KTooLarge {
                k: hi.max(lo),
                available: corpus_len.saturating_sub(1),
            });
        }
        let mut distances = distances.to_vec();
        distances.sort();
        distances.dedup();
        if distances.is_empty() {
            return Err(Error::InvalidConfig("no distance functions selected".into()));
        }
        Ok(SweepPlan {
            appliance,
            ks: k_range.collect(),
            subsets: enumerate_subsets(),
            distances,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.ks.len() * self.subsets.len() * self.distances.len()
    }

    /// Independent (subset, distance) columns, in grid order.
    pub fn columns(&self) -> Vec<(FeatureSubset, DistanceKind)> {
        self.subsets
            .iter()
            .flat_map(|s| self.distances.iter().map(move |d| (*s, *d)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub k: usize,
    pub subset: FeatureSubset,
    pub distance: DistanceKind,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub appliance: ApplianceKind,
    pub ks: Vec<usize>,
    pub distances: Vec<DistanceKind>,
    /// Ordered by K, then subset, then distance.
    pub grid: Vec<GridCell>,
    /// First maximum in grid order: smaller K, then fewer units, then unit
    /// order, then Euclidean.
    pub optimal: GridCell,
}

/// Accuracy of one (subset, distance) column for every K of the plan.
pub fn sweep_column(
    context: &LoocvContext<'_>,
    plan: &SweepPlan,
    subset: FeatureSubset,
    distance: DistanceKind,
    metric: &MetricConfig,
) -> Result<Vec<f64>> {
    let profiles = context.appliance_profiles(&plan.appliance)?;
    let rankings = context.rankings(subset, distance);
    plan.ks
        .iter()
        .map(|k| {
            context
                .score(&plan.appliance, &profiles, &rankings, *k, metric)?
                .mean()
                .ok_or(Error::NoSamples)
        })
        .collect()
}

impl SweepResult {
    /// Builds the grid from per-column K series laid out as
    /// [`SweepPlan::columns`].
    pub fn assemble(plan: &SweepPlan, columns: &[Vec<f64>]) -> Result<Self> {
        let expected = plan.subsets.len() * plan.distances.len();
        if columns.len() != expected || columns.iter().any(|c| c.len() != plan.ks.len()) {
            return Err(Error::DimensionMismatch {
                expected,
                found: columns.len(),
            });
        }
        let keys = plan.columns();
        let mut grid = Vec::with_capacity(plan.cell_count());
        for (ki, k) in plan.ks.iter().enumerate() {
            for ((subset, distance), column) in keys.iter().zip(columns) {
                grid.push(GridCell {
                    k: *k,
                    subset: *subset,
                    distance: *distance,
                    accuracy: column[ki],
                });
            }
        }
        let mut optimal = grid[0];
        for cell in &grid[1..] {
            if cell.accuracy > optimal.accuracy {
                optimal = *cell;
            }
        }
        Ok(SweepResult {
            appliance: plan.appliance.clone(),
            ks: plan.ks.clone(),
            distances: plan.distances.clone(),
            grid,
            optimal,
        })
    }

    pub fn cell(&self, k: usize, subset: FeatureSubset, distance: DistanceKind) -> Option<&GridCell> {
        self.grid
            .iter()
            .find(|c| c.k == k && c.subset == subset && c.distance == distance)
    }
}

/// Serial sweep over `k_range` x all 31 subsets x `distances`.
pub fn sweep(
    corpus: &Corpus,
    appliance: &ApplianceKind,
    k_range: RangeInclusive<usize>,
    distances: &[DistanceKind],
    metric: &MetricConfig,
) -> Result<SweepResult> {
    let plan = SweepPlan::new(appliance.clone(), k_range, distances, corpus.len())?;
    let context = LoocvContext::new(corpus)?;
    let columns = plan
        .columns()
        .into_iter()
        .map(|(s, d)| sweep_column(&context, &plan, s, d, metric))
        .collect::<Result<Vec<_>>>()?;
    SweepResult::assemble(&plan, &columns)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetPoint {
    pub subset: FeatureSubset,
    pub accuracy: f64,
}

/// Accuracy against K at the optimal subset and distance.
pub fn sensitivity_k(result: &SweepResult) -> Vec<KPoint> {
    result
        .grid
        .iter()
        .filter(|c| c.subset == result.optimal.subset && c.distance == result.optimal.distance)
        .map(|c| KPoint {
            k: c.k,
            accuracy: c.accuracy,
        })
        .collect()
}

/// Accuracy against feature subset at the optimal K and distance.
pub fn sensitivity_features(result: &SweepResult) -> Vec<SubsetPoint> {
    result
        .grid
        .iter()
        .filter(|c| c.k == result.optimal.k && c.distance == result.optimal.distance)
        .map(|c| SubsetPoint {
            subset: c.subset,
            accuracy: c.accuracy,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{HomeRecord, MonthlyProfile, StaticCharacteristics};
    use crate::evaluation::evaluate_loocv;
    use crate::features::FeatureUnit;
    use alloc::collections::BTreeMap;
    use alloc::format;

    fn clones(n: usize) -> Corpus {
        let homes = (0..n)
            .map(|i| HomeRecord {
                home_id: format!("h{i}").as_str().into(),
                statics: StaticCharacteristics {
                    area_sqft: 1500.0,
                    occupants: 3,
                    rooms: 5,
                },
                aggregate: MonthlyProfile::new([700.1; 12]).unwrap(),
                appliances: BTreeMap::from([(ApplianceKind::Dryer, MonthlyProfile::new([33.3; 12]).unwrap())]),
            })
            .collect();
        Corpus::new(homes, MetricConfig::default(), 0.05).unwrap()
    }

    #[test]
    fn clone_corpus_is_flat_100() {
        let corpus = clones(4);
        let r = sweep(
            &corpus,
            &ApplianceKind::Dryer,
            1..=2,
            &DistanceKind::ALL,
            &MetricConfig::default(),
        )
        .unwrap();
        assert_eq!(r.grid.len(), 124);
        assert!(r.grid.iter().all(|c| c.accuracy == 100.0));
        assert_eq!(r.optimal.k, 1);
        assert_eq!(
            r.optimal.subset,
            FeatureSubset::new(&[FeatureUnit::RawMonthly]).unwrap()
        );
        assert_eq!(r.optimal.distance, DistanceKind::Euclidean);

        let by_k = sensitivity_k(&r);
        assert_eq!(by_k.len(), 2);
        assert!(by_k.iter().all(|p| p.accuracy == 100.0));
        let by_subset = sensitivity_features(&r);
        assert_eq!(by_subset.len(), 31);
        assert!(by_subset.iter().all(|p| p.accuracy == 100.0));
    }

    #[test]
    fn grid_cells_match_single_evaluations() {
        let mut homes: Vec<HomeRecord> = clones(5).homes().to_vec();
        for (i, h) in homes.iter_mut().enumerate() {
            let f = 1.0 + i as f64 * 0.37;
            h.aggregate = h.aggregate.scaled(f);
            h.statics.occupants = 1 + (i as u32 * 7) % 4;
            h.appliances.insert(
                ApplianceKind::Dryer,
                MonthlyProfile::new([20.0 + 9.0 * i as f64; 12]).unwrap(),
            );
        }
        let corpus = Corpus::new(homes, MetricConfig::default(), 0.05).unwrap();
        let metric = MetricConfig::default();
        let r = sweep(&corpus, &ApplianceKind::Dryer, 1..=3, &DistanceKind::ALL, &metric).unwrap();
        for cell in &r.grid {
            let direct = evaluate_loocv(
                &corpus,
                &ApplianceKind::Dryer,
                cell.k,
                cell.subset,
                cell.distance,
                &metric,
            )
            .unwrap();
            assert_eq!(direct, cell.accuracy);
            assert!((0.0..=100.0).contains(&cell.accuracy));
        }
        let best = r.grid.iter().map(|c| c.accuracy).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(r.optimal.accuracy, best);
        let at_k = sensitivity_k(&r);
        assert!(at_k
            .iter()
            .any(|p| p.k == r.optimal.k && p.accuracy == r.optimal.accuracy));
    }

    #[test]
    fn plan_rejects_bad_k() {
        assert!(SweepPlan::new(ApplianceKind::Fridge, 1..=4, &DistanceKind::ALL, 4).is_err());
        assert!(SweepPlan::new(ApplianceKind::Fridge, 0..=2, &DistanceKind::ALL, 4).is_err());
        assert!(SweepPlan::new(ApplianceKind::Fridge, 1..=3, &[], 4).is_err());
    }
}
