use alloc::vec::Vec;

use crate::dataset::{ApplianceKind, Corpus, HomeId, MonthlyProfile};
use crate::exact::{FixedProfile, ProfileSum};
use crate::features::{extract_all, normalize_value, FeatureSubset, FEATURE_COUNT};
use crate::neighbors::{distance_slices, DistanceKind};
use crate::{Error, Result};

use super::metric::{energy_accuracy, MetricConfig, Score};

/// Reference homes of one fold, nearest first, as `(home index, distance)`.
pub type Ranking = Vec<(usize, f64)>;

/// Precomputed features and per-fold normalisation for leave-one-out runs
/// over one corpus.
///
/// Fold `f` holds home `f` out; its normalisation ranges come from every
/// other home only.
pub struct LoocvContext<'a> {
    corpus: &'a Corpus,
    features: Vec<[f64; FEATURE_COUNT]>,
    fold_ranges: Vec<[(f64, f64); FEATURE_COUNT]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomeOutcome {
    pub home_id: HomeId,
    pub neighbors: Vec<HomeId>,
    pub distances: Vec<f64>,
    pub predicted: MonthlyProfile,
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvOutcome {
    pub per_home: Vec<HomeOutcome>,
    /// Pooled over every (home, month) sample, homes in id order.
    pub total: Score,
}

impl LoocvOutcome {
    pub fn accuracy(&self) -> Result<f64> {
        self.total.mean().ok_or(Error::NoSamples)
    }
}

impl<'a> LoocvContext<'a> {
    pub fn new(corpus: &'a Corpus) -> Result<Self> {
        let features = corpus
            .homes()
            .iter()
            .map(|h| {
                let v = extract_all(h)?;
                let mut row = [0.0; FEATURE_COUNT];
                row.copy_from_slice(&v.values);
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = features.len();
        let fold_ranges = (0..n)
            .map(|fold| {
                let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); FEATURE_COUNT];
                for (h, row) in features.iter().enumerate() {
                    if h == fold {
                        continue;
                    }
                    for (r, x) in ranges.iter_mut().zip(row) {
                        r.0 = r.0.min(*x);
                        r.1 = r.1.max(*x);
                    }
                }
                ranges
            })
            .collect();
        Ok(LoocvContext {
            corpus,
            features,
            fold_ranges,
        })
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Normalised `subset` features of `home` under fold `fold`.
    pub fn normalized(&self, fold: usize, home: usize, subset: FeatureSubset) -> Vec<f64> {
        let ranges = &self.fold_ranges[fold];
        subset
            .columns()
            .map(|c| normalize_value(self.features[home][c], ranges[c].0, ranges[c].1))
            .collect()
    }

    /// Ranking of every other home for each fold.
    pub fn rankings(&self, subset: FeatureSubset, distance: DistanceKind) -> Vec<Ranking> {
        let n = self.len();
        (0..n)
            .map(|fold| {
                let vectors: Vec<Vec<f64>> = (0..n).map(|h| self.normalized(fold, h, subset)).collect();
                let mut ranking: Ranking = (0..n)
                    .filter(|h| *h != fold)
                    .map(|h| (h, distance_slices(&vectors[fold], &vectors[h], distance)))
                    .collect();
                // Homes are sorted by id, so index order is id order.
                ranking.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
                ranking
            })
            .collect()
    }

    /// Fixed-point appliance profiles of every home.
    pub fn appliance_profiles(&self, appliance: &ApplianceKind) -> Result<Vec<FixedProfile>> {
        self.corpus
            .homes()
            .iter()
            .map(|h| h.appliance(appliance).map(FixedProfile::from))
            .collect()
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k + 1 > self.len() {
            return Err(Error::KTooLarge {
                k,
                available: self.len().saturating_sub(1),
            });
        }
        Ok(())
    }

    /// Pooled score of the K-nearest prediction over all folds.
    pub fn score(
        &self,
        appliance: &ApplianceKind,
        profiles: &[FixedProfile],
        rankings: &[Ranking],
        k: usize,
        metric: &MetricConfig,
    ) -> Result<Score> {
        self.check_k(k)?;
        let months = metric.evaluated_months(appliance);
        let mut total = Score::default();
        for (fold, ranking) in rankings.iter().enumerate() {
            let mut sum = ProfileSum::new();
            for (h, _) in &ranking[..k] {
                sum.add(&profiles[*h]);
            }
            let actual = self.corpus.homes()[fold].appliance(appliance)?;
            for m in months.indices() {
                if let Some(acc) = energy_accuracy(sum.month_mean(m), actual.values()[m], metric.zero_actual_rule) {
                    total.push(acc);
                }
            }
        }
        Ok(total)
    }

    /// Full per-home outcome for one configuration.
    pub fn evaluate(
        &self,
        appliance: &ApplianceKind,
        k: usize,
        subset: FeatureSubset,
        distance: DistanceKind,
        metric: &MetricConfig,
    ) -> Result<LoocvOutcome> {
        self.check_k(k)?;
        let profiles = self.appliance_profiles(appliance)?;
        let rankings = self.rankings(subset, distance);
        let months = metric.evaluated_months(appliance);
        let homes = self.corpus.homes();
        let mut total = Score::default();
        let mut per_home = Vec::with_capacity(homes.len());
        for (fold, ranking) in rankings.iter().enumerate() {
            let nearest = &ranking[..k];
            let mut sum = ProfileSum::new();
            for (h, _) in nearest {
                sum.add(&profiles[*h]);
            }
            let predicted = sum.mean().expect("k >= 1");
            let actual = homes[fold].appliance(appliance)?;
            let mut score = Score::default();
            for m in months.indices() {
                if let Some(acc) = energy_accuracy(predicted.values()[m], actual.values()[m], metric.zero_actual_rule) {
                    score.push(acc);
                    total.push(acc);
                }
            }
            per_home.push(HomeOutcome {
                home_id: homes[fold].home_id.clone(),
                neighbors: nearest.iter().map(|(h, _)| homes[*h].home_id.clone()).collect(),
                distances: nearest.iter().map(|(_, d)| *d).collect(),
                predicted,
                score,
            });
        }
        Ok(LoocvOutcome { per_home, total })
    }
}

/// Mean leave-one-out accuracy over all (home, month) samples for one
/// configuration.
pub fn evaluate_loocv(
    corpus: &Corpus,
    appliance: &ApplianceKind,
    k: usize,
    subset: FeatureSubset,
    distance: DistanceKind,
    metric: &MetricConfig,
) -> Result<f64> {
    LoocvContext::new(corpus)?
        .evaluate(appliance, k, subset, distance, metric)?
        .accuracy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{HomeRecord, StaticCharacteristics};
    use crate::evaluation::ZeroActualRule;
    use crate::features::FeatureUnit;
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn home(id: &str, area: f64, fridge: f64) -> HomeRecord {
        HomeRecord {
            home_id: id.into(),
            statics: StaticCharacteristics {
                area_sqft: area,
                occupants: 2,
                rooms: 4,
            },
            aggregate: MonthlyProfile::new([400.0; 12]).unwrap(),
            appliances: BTreeMap::from([(ApplianceKind::Fridge, MonthlyProfile::new([fridge; 12]).unwrap())]),
        }
    }

    #[test]
    fn identical_twins_score_100() {
        let corpus = Corpus::new(
            vec![home("a", 1000.0, 37.3), home("b", 1000.0, 37.3)],
            MetricConfig::default(),
            0.05,
        )
        .unwrap();
        let acc = evaluate_loocv(
            &corpus,
            &ApplianceKind::Fridge,
            1,
            FeatureSubset::all(),
            DistanceKind::Euclidean,
            &MetricConfig::default(),
        )
        .unwrap();
        assert_eq!(acc, 100.0);
    }

    #[test]
    fn skip_rule_drops_zero_home() {
        let corpus = Corpus::new(
            vec![home("a", 1000.0, 0.0), home("b", 1100.0, 40.0), home("c", 1200.0, 50.0)],
            MetricConfig::default(),
            0.05,
        )
        .unwrap();
        let metric = MetricConfig {
            zero_actual_rule: ZeroActualRule::Skip,
            ..MetricConfig::default()
        };
        let subset = FeatureSubset::new(&[FeatureUnit::Area]).unwrap();
        let out = LoocvContext::new(&corpus)
            .unwrap()
            .evaluate(&ApplianceKind::Fridge, 1, subset, DistanceKind::Euclidean, &metric)
            .unwrap();
        assert_eq!(out.per_home[0].score.count, 0);
        assert_eq!(out.total.count, 24);
        // b's nearest is a (0 kWh) -> 0; c's nearest is b (40 vs 50) -> 80.
        assert_eq!(out.accuracy().unwrap(), 40.0);
    }

    #[test]
    fn k_bounds() {
        let corpus = Corpus::new(
            vec![home("a", 1000.0, 1.0), home("b", 1000.0, 1.0)],
            MetricConfig::default(),
            0.05,
        )
        .unwrap();
        for k in [0, 2] {
            assert!(matches!(
                evaluate_loocv(
                    &corpus,
                    &ApplianceKind::Fridge,
                    k,
                    FeatureSubset::all(),
                    DistanceKind::Euclidean,
                    &MetricConfig::default()
                ),
                Err(Error::KTooLarge { .. })
            ));
        }
    }
}
