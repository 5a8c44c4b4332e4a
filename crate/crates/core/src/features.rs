//! Per-home feature extraction, min-max normalisation and the feature-unit
//! subsets swept during evaluation.
//!
//! Every home has 19 scalar features, grouped into five units:
//!
//! | unit             | width | columns                                          |
//! |------------------|-------|--------------------------------------------------|
//! | `RawMonthly`     | 12    | `raw_m01` .. `raw_m12` (monthly aggregate kWh)   |
//! | `DerivedMonthly` | 4     | `variance`, `min_over_max`, `range`, `relative_range` |
//! | `Area`           | 1     | `area_sqft`                                      |
//! | `Occupants`      | 1     | `occupants`                                      |
//! | `Rooms`          | 1     | `rooms`                                          |

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{Corpus, HomeRecord};
use crate::{Error, Result};

pub const FEATURE_COUNT: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureUnit {
    RawMonthly,
    DerivedMonthly,
    Area,
    Occupants,
    Rooms,
}

impl FeatureUnit {
    pub const ALL: [FeatureUnit; 5] = [
        FeatureUnit::RawMonthly,
        FeatureUnit::DerivedMonthly,
        FeatureUnit::Area,
        FeatureUnit::Occupants,
        FeatureUnit::Rooms,
    ];

    pub fn width(self) -> usize {
        match self {
            FeatureUnit::RawMonthly => 12,
            FeatureUnit::DerivedMonthly => 4,
            _ => 1,
        }
    }

    /// Column range of this unit in the full 19-feature layout.
    pub fn columns(self) -> core::ops::Range<usize> {
        match self {
            FeatureUnit::RawMonthly => 0..12,
            FeatureUnit::DerivedMonthly => 12..16,
            FeatureUnit::Area => 16..17,
            FeatureUnit::Occupants => 17..18,
            FeatureUnit::Rooms => 18..19,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureUnit::RawMonthly => "raw_monthly",
            FeatureUnit::DerivedMonthly => "derived_monthly",
            FeatureUnit::Area => "area",
            FeatureUnit::Occupants => "occupants",
            FeatureUnit::Rooms => "rooms",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

/// Column names of the full feature layout, in order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "raw_m01",
    "raw_m02",
    "raw_m03",
    "raw_m04",
    "raw_m05",
    "raw_m06",
    "raw_m07",
    "raw_m08",
    "raw_m09",
    "raw_m10",
    "raw_m11",
    "raw_m12",
    "variance",
    "min_over_max",
    "range",
    "relative_range",
    "area_sqft",
    "occupants",
    "rooms",
];

/// Non-empty set of feature units, stored as a bitmask over [`FeatureUnit::ALL`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSubset(u8);

impl FeatureSubset {
    pub fn new(units: &[FeatureUnit]) -> Result<Self> {
        let mask = units.iter().fold(0u8, |m, u| m | u.bit());
        Self::from_mask(mask)
    }

    pub fn from_mask(mask: u8) -> Result<Self> {
        if mask == 0 || mask >= 1 << 5 {
            return Err(Error::InvalidConfig(format!(
                "feature subset mask {mask} is not a non-empty subset of 5 units"
            )));
        }
        Ok(FeatureSubset(mask))
    }

    pub fn all() -> Self {
        FeatureSubset(0b11111)
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, unit: FeatureUnit) -> bool {
        self.0 & unit.bit() != 0
    }

    pub fn units(self) -> impl Iterator<Item = FeatureUnit> {
        FeatureUnit::ALL.into_iter().filter(move |u| self.contains(*u))
    }

    pub fn unit_count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn width(self) -> usize {
        self.units().map(FeatureUnit::width).sum()
    }

    /// Indices into the full 19-feature layout covered by this subset.
    pub fn columns(self) -> impl Iterator<Item = usize> {
        self.units().flat_map(FeatureUnit::columns)
    }

    /// Reporting order: fewer units first, then lexicographic over the
    /// ordered unit lists.
    pub fn report_cmp(self, other: Self) -> core::cmp::Ordering {
        self.unit_count()
            .cmp(&other.unit_count())
            .then_with(|| lex_cmp(self.0, other.0))
    }
}

// For equal-size sets over a bit order, the set holding the lowest differing
// bit comes first lexicographically.
fn lex_cmp(a: u8, b: u8) -> core::cmp::Ordering {
    let diff = a ^ b;
    if diff == 0 {
        core::cmp::Ordering::Equal
    } else if a & (diff & diff.wrapping_neg()) != 0 {
        core::cmp::Ordering::Less
    } else {
        core::cmp::Ordering::Greater
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for u in self.units() {
            if !first {
                f.write_str("+")?;
            }
            f.write_str(u.name())?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for FeatureSubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut units = Vec::new();
        for part in s.split(['+', ',']) {
            let part = part.trim();
            let unit = FeatureUnit::ALL
                .into_iter()
                .find(|u| u.name().eq_ignore_ascii_case(part))
                .ok_or_else(|| Error::InvalidConfig(format!("unknown feature unit `{part}`")))?;
            units.push(unit);
        }
        FeatureSubset::new(&units)
    }
}

impl Serialize for FeatureSubset {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSubset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All 31 non-empty subsets in reporting order.
pub fn enumerate_subsets() -> Vec<FeatureSubset> {
    let mut out: Vec<FeatureSubset> = (1u8..32).map(FeatureSubset).collect();
    out.sort_by(|a, b| a.report_cmp(*b));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub subset: FeatureSubset,
    pub normalized: bool,
}

impl FeatureVector {
    /// Restricts a full 19-feature vector to `subset`.
    pub fn select(&self, subset: FeatureSubset) -> Result<FeatureVector> {
        if self.subset != FeatureSubset::all() {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_COUNT,
                found: self.values.len(),
            });
        }
        Ok(FeatureVector {
            values: subset.columns().map(|c| self.values[c]).collect(),
            subset,
            normalized: self.normalized,
        })
    }
}

/// Monthly aggregate energies in month order.
pub fn extract_raw(home: &HomeRecord) -> [f64; 12] {
    *home.aggregate.values()
}

/// `[variance, min/max, max - min, (max - min)/max]` over the twelve monthly
/// aggregates; variance uses the population denominator.
pub fn extract_derived(home: &HomeRecord) -> Result<[f64; 4]> {
    let values = home.aggregate.values();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        return Err(Error::DegenerateProfile(home.home_id.clone()));
    }
    let mean = values.iter().sum::<f64>() / 12.0;
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 12.0;
    let range = max - min;
    Ok([variance, min / max, range, range / max])
}

/// All 19 unnormalised features of a home.
pub fn extract_all(home: &HomeRecord) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(FEATURE_COUNT);
    values.extend_from_slice(&extract_raw(home));
    values.extend_from_slice(&extract_derived(home)?);
    values.push(home.statics.area_sqft);
    values.push(f64::from(home.statics.occupants));
    values.push(f64::from(home.statics.rooms));
    Ok(FeatureVector {
        values,
        subset: FeatureSubset::all(),
        normalized: false,
    })
}

/// Unnormalised features of a home restricted to `subset`.
pub fn extract(home: &HomeRecord, subset: FeatureSubset) -> Result<FeatureVector> {
    extract_all(home)?.select(subset)
}

/// Per-feature `(min, max)` over a reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub subset: FeatureSubset,
    pub ranges: Vec<(f64, f64)>,
}

impl NormalizationSpec {
    /// Fits ranges over unnormalised vectors that share one subset.
    pub fn fit<'a, I>(reference: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let mut iter = reference.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidConfig("normalisation reference is empty".into()))?;
        let mut ranges: Vec<(f64, f64)> = first.values.iter().map(|v| (*v, *v)).collect();
        for v in iter {
            if v.subset != first.subset || v.values.len() != ranges.len() {
                return Err(Error::DimensionMismatch {
                    expected: ranges.len(),
                    found: v.values.len(),
                });
            }
            for (r, x) in ranges.iter_mut().zip(&v.values) {
                r.0 = r.0.min(*x);
                r.1 = r.1.max(*x);
            }
        }
        Ok(NormalizationSpec {
            subset: first.subset,
            ranges,
        })
    }

    /// Maps each entry to `(x - min)/(max - min)`; constant features map to
    /// 0.5. Values outside the reference range are not clamped.
    pub fn apply(&self, vector: &FeatureVector) -> Result<FeatureVector> {
        if vector.values.len() != self.ranges.len() || vector.subset != self.subset {
            return Err(Error::DimensionMismatch {
                expected: self.ranges.len(),
                found: vector.values.len(),
            });
        }
        let values = vector
            .values
            .iter()
            .zip(&self.ranges)
            .map(|(x, (lo, hi))| normalize_value(*x, *lo, *hi))
            .collect();
        Ok(FeatureVector {
            values,
            subset: vector.subset,
            normalized: true,
        })
    }
}

#[inline]
pub fn normalize_value(x: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (x - min) / (max - min)
    } else {
        0.5
    }
}

/// Normalisation fitted on every home of `reference` for `subset`.
pub fn build_normalization(reference: &Corpus, subset: FeatureSubset) -> Result<NormalizationSpec> {
    let vectors = reference
        .homes()
        .iter()
        .map(|h| extract(h, subset))
        .collect::<Result<Vec<_>>>()?;
    NormalizationSpec::fit(vectors.iter())
}

pub fn apply_normalization(vector: &FeatureVector, spec: &NormalizationSpec) -> Result<FeatureVector> {
    spec.apply(vector)
}
