use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{ApplianceKind, MonthlyProfile};
use crate::{Error, Result};

/// What to do with a month whose actual energy is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroActualRule {
    /// 100 when the prediction is also zero, else 0.
    #[default]
    BothZero100,
    /// Drop the sample from every average.
    Skip,
}

/// Energy accuracy in percent: `max(0, 100 * (1 - |p - a| / a))`.
///
/// Returns `None` only for `a == 0` under [`ZeroActualRule::Skip`].
#[inline]
pub fn energy_accuracy(predicted: f64, actual: f64, rule: ZeroActualRule) -> Option<f64> {
    if actual > 0.0 {
        let relative = libm::fabs(predicted - actual) / actual;
        Some(if relative >= 1.0 { 0.0 } else { 100.0 * (1.0 - relative) })
    } else {
        match rule {
            ZeroActualRule::BothZero100 => Some(if predicted == 0.0 { 100.0 } else { 0.0 }),
            ZeroActualRule::Skip => None,
        }
    }
}

/// Set of calendar months as a 12-bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MonthSet(u16);

impl MonthSet {
    pub const ALL: MonthSet = MonthSet(0x0fff);

    pub fn from_months(months: impl IntoIterator<Item = u8>) -> Result<Self> {
        let mut mask = 0u16;
        for m in months {
            if !(1..=12).contains(&m) {
                return Err(Error::InvalidConfig(format!("month {m} is outside 1..=12")));
            }
            mask |= 1 << (m - 1);
        }
        if mask == 0 {
            return Err(Error::InvalidConfig("month set is empty".into()));
        }
        Ok(MonthSet(mask))
    }

    pub fn contains(self, month: u8) -> bool {
        (1..=12).contains(&month) && self.0 & (1 << (month - 1)) != 0
    }

    /// Calendar months, ascending.
    pub fn months(self) -> impl Iterator<Item = u8> {
        (1u8..=12).filter(move |m| self.contains(*m))
    }

    /// Zero-based month indices, ascending.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        self.months().map(|m| usize::from(m) - 1)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl Serialize for MonthSet {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.months())
    }
}

impl<'de> Deserialize<'de> for MonthSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let months = Vec::<u8>::deserialize(d)?;
        MonthSet::from_months(months).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Months scored for HVAC; every other appliance uses all twelve.
    pub hvac_months: MonthSet,
    pub zero_actual_rule: ZeroActualRule,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            hvac_months: MonthSet::from_months(5..=10).expect("valid default"),
            zero_actual_rule: ZeroActualRule::BothZero100,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hvac_months.is_empty() {
            return Err(Error::InvalidConfig("hvac_months is empty".into()));
        }
        Ok(())
    }

    pub fn evaluated_months(&self, appliance: &ApplianceKind) -> MonthSet {
        match appliance {
            ApplianceKind::Hvac => self.hvac_months,
            _ => MonthSet::ALL,
        }
    }
}

/// Running sum of per-sample accuracies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Score {
    pub sum: f64,
    pub count: usize,
}

impl Score {
    #[inline]
    pub fn push(&mut self, accuracy: f64) {
        self.sum += accuracy;
        self.count += 1;
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Per-month accuracies over `months` (zero-based), skipping samples the
/// rule drops.
pub fn month_accuracies<'a>(
    predicted: &'a MonthlyProfile,
    actual: &'a MonthlyProfile,
    months: impl IntoIterator<Item = usize> + 'a,
    rule: ZeroActualRule,
) -> impl Iterator<Item = f64> + 'a {
    months
        .into_iter()
        .filter_map(move |m| energy_accuracy(predicted.values()[m], actual.values()[m], rule))
}

pub fn profile_score(
    predicted: &MonthlyProfile,
    actual: &MonthlyProfile,
    months: impl IntoIterator<Item = usize>,
    rule: ZeroActualRule,
) -> Score {
    let mut score = Score::default();
    for acc in month_accuracies(predicted, actual, months, rule) {
        score.push(acc);
    }
    score
}
