//! K-nearest-neighbour search over normalised feature vectors and the
//! neighbour-average appliance prediction.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::TrainWindow;
use crate::dataset::{ApplianceKind, Corpus, HomeId, MonthlyProfile};
use crate::exact::mean_profile;
use crate::features::{FeatureSubset, FeatureVector};
use crate::oracle::SearchMode;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Euclidean,
    Manhattan,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 2] = [DistanceKind::Euclidean, DistanceKind::Manhattan];

    pub fn name(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Manhattan => "manhattan",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistanceKind::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown distance `{s}`")))
    }
}

/// Distance between raw slices of equal length.
#[inline]
pub fn distance_slices(a: &[f64], b: &[f64], kind: DistanceKind) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    match kind {
        DistanceKind::Euclidean => {
            let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            libm::sqrt(ss)
        }
        DistanceKind::Manhattan => a.iter().zip(b).map(|(x, y)| libm::fabs(x - y)).sum(),
    }
}

pub fn distance(a: &FeatureVector, b: &FeatureVector, kind: DistanceKind) -> Result<f64> {
    if a.values.len() != b.values.len() || a.subset != b.subset {
        return Err(Error::DimensionMismatch {
            expected: a.values.len(),
            found: b.values.len(),
        });
    }
    Ok(distance_slices(&a.values, &b.values, kind))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighborhood {
    pub test_home_id: HomeId,
    /// Nearest first.
    pub neighbor_ids: Vec<HomeId>,
    pub distances: Vec<f64>,
}

/// Orders `(id, distance)` candidates by distance, then by id.
pub fn rank_candidates(candidates: &mut [(&HomeId, f64)]) {
    candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
}

/// The `k` reference homes closest to `test`; equal distances resolve by
/// ascending home id.
pub fn find_neighborhood(
    test_home_id: &HomeId,
    test: &FeatureVector,
    reference: &[(HomeId, FeatureVector)],
    k: usize,
    kind: DistanceKind,
) -> Result<Neighborhood> {
    if k == 0 || k > reference.len() {
        return Err(Error::KTooLarge {
            k,
            available: reference.len(),
        });
    }
    let mut scored = Vec::with_capacity(reference.len());
    for (id, v) in reference {
        if id == test_home_id {
            return Err(Error::TestHomeInReference(id.clone()));
        }
        scored.push((id, distance(test, v, kind)?));
    }
    rank_candidates(&mut scored);
    scored.truncate(k);
    Ok(Neighborhood {
        test_home_id: test_home_id.clone(),
        neighbor_ids: scored.iter().map(|(id, _)| (*id).clone()).collect(),
        distances: scored.iter().map(|(_, d)| *d).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Knn,
    NationalAverage,
    Fhmm,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Knn => "knn",
            Method::NationalAverage => "national_average",
            Method::Fhmm => "fhmm",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters that produced an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Provenance {
    Knn {
        k: usize,
        subset: FeatureSubset,
        distance: DistanceKind,
        neighbors: Vec<HomeId>,
    },
    NationalAverage {
        fraction: f64,
    },
    Fhmm {
        train_window: TrainWindow,
        modeled: Vec<ApplianceKind>,
    },
    Oracle {
        subset: Vec<HomeId>,
        mode: SearchMode,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceEstimate {
    pub home_id: HomeId,
    pub appliance: ApplianceKind,
    pub monthly: MonthlyProfile,
    pub method: Method,
    pub provenance: Provenance,
}

/// Month-wise unweighted mean of the neighbours' profiles for `appliance`.
pub fn predict_appliance(
    neighborhood: &Neighborhood,
    corpus: &Corpus,
    appliance: &ApplianceKind,
    subset: FeatureSubset,
    distance: DistanceKind,
) -> Result<ApplianceEstimate> {
    let mut profiles = Vec::with_capacity(neighborhood.neighbor_ids.len());
    for id in &neighborhood.neighbor_ids {
        let home = corpus.get(id).ok_or_else(|| Error::UnknownHome(id.clone()))?;
        profiles.push(home.appliance(appliance)?);
    }
    let monthly = mean_profile(profiles.iter().copied()).ok_or(Error::KTooLarge {
        k: 0,
        available: corpus.len(),
    })?;
    Ok(ApplianceEstimate {
        home_id: neighborhood.test_home_id.clone(),
        appliance: appliance.clone(),
        monthly,
        method: Method::Knn,
        provenance: Provenance::Knn {
            k: neighborhood.neighbor_ids.len(),
            subset,
            distance,
            neighbors: neighborhood.neighbor_ids.clone(),
        },
    })
}

/// Label used when serialising a neighbourhood in reports.
pub fn describe(neighborhood: &Neighborhood) -> String {
    let mut s = String::new();
    for (i, id) in neighborhood.neighbor_ids.iter().enumerate() {
        if i > 0 {
            s.push(';');
        }
        s.push_str(id.as_str());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{HomeRecord, StaticCharacteristics};
    use crate::evaluation::MetricConfig;
    use crate::features::FeatureUnit;
    use alloc::collections::BTreeMap;
    use alloc::vec;
    use proptest::prelude::*;

    fn fv(values: Vec<f64>) -> FeatureVector {
        let subset = if values.len() == 19 {
            FeatureSubset::all()
        } else {
            FeatureSubset::new(&[FeatureUnit::Area, FeatureUnit::Rooms]).unwrap()
        };
        FeatureVector {
            values,
            subset,
            normalized: true,
        }
    }

    #[test]
    fn three_four_five() {
        let a = fv(vec![0.0, 0.0]);
        let b = fv(vec![3.0, 4.0]);
        assert_eq!(distance(&a, &b, DistanceKind::Euclidean).unwrap(), 5.0);
        assert_eq!(distance(&a, &b, DistanceKind::Manhattan).unwrap(), 7.0);
        assert_eq!(distance(&a, &a, DistanceKind::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_dimensions() {
        let a = fv(vec![0.0, 0.0]);
        let b = fv(vec![0.0; 19]);
        assert!(matches!(
            distance(&a, &b, DistanceKind::Euclidean),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nearest_is_exact_match_and_k_all_sorts() {
        let reference = vec![
            (HomeId::from("a"), fv(vec![0.1, 0.2])),
            (HomeId::from("b"), fv(vec![0.9, 0.9])),
        ];
        let test = fv(vec![0.1, 0.2]);
        let n = find_neighborhood(&"t".into(), &test, &reference, 1, DistanceKind::Euclidean).unwrap();
        assert_eq!(n.neighbor_ids, vec![HomeId::from("a")]);
        assert_eq!(n.distances, vec![0.0]);

        let all = find_neighborhood(&"t".into(), &fv(vec![1.0, 1.0]), &reference, 2, DistanceKind::Manhattan).unwrap();
        assert_eq!(all.neighbor_ids, vec![HomeId::from("b"), HomeId::from("a")]);

        assert!(matches!(
            find_neighborhood(&"t".into(), &test, &reference, 3, DistanceKind::Euclidean),
            Err(Error::KTooLarge { k: 3, available: 2 })
        ));
        assert!(matches!(
            find_neighborhood(&"a".into(), &test, &reference, 1, DistanceKind::Euclidean),
            Err(Error::TestHomeInReference(_))
        ));
    }

    #[test]
    fn ties_break_by_home_id() {
        let reference = vec![
            (HomeId::from("z"), fv(vec![1.0, 0.0])),
            (HomeId::from("m"), fv(vec![0.0, 1.0])),
            (HomeId::from("b"), fv(vec![-1.0, 0.0])),
        ];
        let n = find_neighborhood(&"t".into(), &fv(vec![0.0, 0.0]), &reference, 2, DistanceKind::Euclidean).unwrap();
        assert_eq!(n.neighbor_ids, vec![HomeId::from("b"), HomeId::from("m")]);
    }

    fn corpus_with_fridge(values: &[(&str, f64)]) -> Corpus {
        let homes = values
            .iter()
            .map(|(id, jan)| {
                let mut fridge = [10.0; 12];
                fridge[0] = *jan;
                HomeRecord {
                    home_id: (*id).into(),
                    statics: StaticCharacteristics {
                        area_sqft: 1000.0,
                        occupants: 1,
                        rooms: 1,
                    },
                    aggregate: MonthlyProfile::new([500.0; 12]).unwrap(),
                    appliances: BTreeMap::from([(ApplianceKind::Fridge, MonthlyProfile::new(fridge).unwrap())]),
                }
            })
            .collect();
        Corpus::new(homes, MetricConfig::default(), 0.05).unwrap()
    }

    fn hood(ids: &[&str]) -> Neighborhood {
        Neighborhood {
            test_home_id: "t".into(),
            neighbor_ids: ids.iter().map(|s| HomeId::from(*s)).collect(),
            distances: vec![0.0; ids.len()],
        }
    }

    #[test]
    fn prediction_is_neighbor_mean() {
        let corpus = corpus_with_fridge(&[("a", 30.0), ("b", 50.0)]);
        let est = predict_appliance(
            &hood(&["a", "b"]),
            &corpus,
            &ApplianceKind::Fridge,
            FeatureSubset::all(),
            DistanceKind::Euclidean,
        )
        .unwrap();
        assert_eq!(est.monthly.month(1), 40.0);
        assert_eq!(est.monthly.month(2), 10.0);

        let single = predict_appliance(
            &hood(&["b"]),
            &corpus,
            &ApplianceKind::Fridge,
            FeatureSubset::all(),
            DistanceKind::Euclidean,
        )
        .unwrap();
        assert_eq!(single.monthly, corpus.homes()[1].appliances[&ApplianceKind::Fridge]);

        let missing = predict_appliance(
            &hood(&["a"]),
            &corpus,
            &ApplianceKind::Dryer,
            FeatureSubset::all(),
            DistanceKind::Euclidean,
        );
        assert!(matches!(missing, Err(Error::MissingApplianceData { .. })));
    }

    proptest! {
        #[test]
        fn metric_axioms(
            a in proptest::collection::vec(-10.0f64..10.0, 5),
            b in proptest::collection::vec(-10.0f64..10.0, 5),
            c in proptest::collection::vec(-10.0f64..10.0, 5),
        ) {
            for kind in DistanceKind::ALL {
                let ab = distance_slices(&a, &b, kind);
                let ba = distance_slices(&b, &a, kind);
                let bc = distance_slices(&b, &c, kind);
                let ac = distance_slices(&a, &c, kind);
                prop_assert!(ab >= 0.0);
                prop_assert_eq!(ab, ba);
                prop_assert!(ac <= ab + bc + 1e-12);
                prop_assert_eq!(distance_slices(&a, &a, kind), 0.0);
            }
        }

        #[test]
        fn neighborhood_is_permutation_invariant(
            points in proptest::collection::vec((0u8..4, 0u8..4), 3..12),
            k_seed in 0usize..100,
            rotate in 0usize..100,
        ) {
            let reference: Vec<(HomeId, FeatureVector)> = points
                .iter()
                .enumerate()
                .map(|(i, (x, y))| (HomeId::new(alloc::format!("h{i:02}")), fv(vec![f64::from(*x), f64::from(*y)])))
                .collect();
            let k = 1 + k_seed % reference.len();
            let test = fv(vec![1.5, 1.5]);
            let n1 = find_neighborhood(&"t".into(), &test, &reference, k, DistanceKind::Euclidean).unwrap();
            let mut shuffled = reference.clone();
            shuffled.rotate_left(rotate % reference.len());
            shuffled.reverse();
            let n2 = find_neighborhood(&"t".into(), &test, &shuffled, k, DistanceKind::Euclidean).unwrap();
            prop_assert_eq!(&n1, &n2);
            prop_assert!(n1.distances.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn prediction_within_neighbor_bounds(values in proptest::collection::vec(0.0f64..500.0, 1..8)) {
            let ids: Vec<String> = (0..values.len()).map(|i| alloc::format!("n{i}")).collect();
            let pairs: Vec<(&str, f64)> = ids.iter().map(|s| s.as_str()).zip(values.iter().copied()).collect();
            let corpus = corpus_with_fridge(&pairs);
            let id_refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
            let est = predict_appliance(&hood(&id_refs), &corpus, &ApplianceKind::Fridge, FeatureSubset::all(), DistanceKind::Euclidean).unwrap();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(est.monthly.month(1) >= lo && est.monthly.month(1) <= hi);
            let mut rev = id_refs.clone();
            rev.reverse();
            let est_rev = predict_appliance(&hood(&rev), &corpus, &ApplianceKind::Fridge, FeatureSubset::all(), DistanceKind::Euclidean).unwrap();
            prop_assert_eq!(est.monthly, est_rev.monthly);
        }
    }
}
