//! Upper-bound baseline: the subset of candidate homes whose average profile
//! is most accurate for a test home.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{ApplianceKind, HomeId, HomeRecord, MonthlyProfile};
use crate::evaluation::{profile_score, MetricConfig, ZeroActualRule};
use crate::exact::{FixedProfile, ProfileSum};
use crate::neighbors::{ApplianceEstimate, Method, Provenance};
use crate::{Error, Result};

/// Default largest candidate count searched exhaustively.
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 24;
/// Hard limit for exhaustive search (bitmask width).
pub const MAX_EXHAUSTIVE_CAP: usize = 30;

// Subsets whose approximate score is within this many accuracy points of the
// running best are re-scored from exact sums.
const RESCORE_MARGIN: f64 = 1e-7;
// f64 running sums are refreshed from the exact sums this often.
const RESYNC_PERIOD: u64 = 1 << 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    Greedy,
}

impl SearchMode {
    pub fn name(self) -> &'static str {
        match self {
            SearchMode::Exhaustive => "exhaustive",
            SearchMode::Greedy => "greedy",
        }
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exhaustive" => Ok(SearchMode::Exhaustive),
            "greedy" => Ok(SearchMode::Greedy),
            other => Err(Error::InvalidConfig(alloc::format!("unknown oracle mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub test_home_id: HomeId,
    pub appliance: ApplianceKind,
    /// Ascending home ids.
    pub best_subset: Vec<HomeId>,
    /// Mean accuracy over the evaluated months, percent.
    pub best_accuracy: f64,
    pub search_mode: SearchMode,
}

impl OracleResult {
    pub fn to_estimate(&self, predicted: MonthlyProfile) -> ApplianceEstimate {
        ApplianceEstimate {
            home_id: self.test_home_id.clone(),
            appliance: self.appliance.clone(),
            monthly: predicted,
            method: Method::Oracle,
            provenance: Provenance::Oracle {
                subset: self.best_subset.clone(),
                mode: self.search_mode,
            },
        }
    }
}

/// Accuracy target for one (test home, appliance) pair.
struct Target {
    months: Vec<usize>,
    actual: [f64; 12],
}

impl Target {
    fn score_exact(&self, sum: &ProfileSum, metric: &MetricConfig) -> Option<f64> {
        let predicted = sum.mean()?;
        self.score_profile(&predicted, metric)
    }

    fn score_profile(&self, predicted: &MonthlyProfile, metric: &MetricConfig) -> Option<f64> {
        let actual = MonthlyProfile::new_unchecked(self.actual);
        profile_score(predicted, &actual, self.months.iter().copied(), metric.zero_actual_rule).mean()
    }
}

// Lexicographic order of the ascending id lists encoded by equal-size masks.
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    diff != 0 && a & (diff & diff.wrapping_neg()) != 0
}

#[derive(Clone, Copy)]
struct Best {
    accuracy: f64,
    mask: u32,
}

impl Best {
    fn improved_by(&self, accuracy: f64, mask: u32) -> bool {
        if accuracy != self.accuracy {
            return accuracy > self.accuracy;
        }
        let (size, best_size) = (mask.count_ones(), self.mask.count_ones());
        size < best_size || (size == best_size && lex_less(mask, self.mask))
    }
}

/// Finds the accuracy-maximal non-empty subset of `candidates`.
///
/// Exhaustive mode enumerates all `2^N - 1` subsets in Gray-code order, so
/// each step adds or removes one home from the running sums. Ties prefer the
/// smaller subset, then the lexicographically smaller id list. Greedy mode
/// adds, one at a time, the home that most improves accuracy until no
/// addition helps.
pub fn oracle_search(
    test: &HomeRecord,
    candidates: &[&HomeRecord],
    appliance: &ApplianceKind,
    metric: &MetricConfig,
    mode: SearchMode,
    cap: usize,
) -> Result<OracleResult> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut sorted: Vec<&HomeRecord> = candidates.to_vec();
    sorted.sort_by(|a, b| a.home_id.cmp(&b.home_id));
    for pair in sorted.windows(2) {
        if pair[0].home_id == pair[1].home_id {
            return Err(Error::DuplicateHome(pair[0].home_id.clone()));
        }
    }
    if sorted.iter().any(|c| c.home_id == test.home_id) {
        return Err(Error::TestHomeInReference(test.home_id.clone()));
    }
    let profiles: Vec<&MonthlyProfile> = sorted.iter().map(|c| c.appliance(appliance)).collect::<Result<_>>()?;
    let target = Target {
        months: metric.evaluated_months(appliance).indices().collect(),
        actual: *test.appliance(appliance)?.values(),
    };
    let (mask, accuracy) = match mode {
        SearchMode::Exhaustive => {
            let cap = cap.min(MAX_EXHAUSTIVE_CAP);
            if sorted.len() > cap {
                return Err(Error::CapExceeded {
                    candidates: sorted.len(),
                    cap,
                });
            }
            exhaustive(&profiles, &target, metric)?
        }
        SearchMode::Greedy => greedy(&profiles, &target, metric)?,
    };
    Ok(OracleResult {
        test_home_id: test.home_id.clone(),
        appliance: appliance.clone(),
        best_subset: members(&mask, &sorted),
        best_accuracy: accuracy,
        search_mode: mode,
    })
}

fn members(mask: &[bool], sorted: &[&HomeRecord]) -> Vec<HomeId> {
    sorted
        .iter()
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|(h, _)| h.home_id.clone())
        .collect()
}

/// Fast f64 form of the target's accuracy over running month sums.
struct ApproxTarget {
    months: Vec<usize>,
    actual: Vec<f64>,
    // 100 / actual.
    scale: Vec<f64>,
    // Zero-actual months scored under BothZero100, with the tolerance under
    // which a drifting running sum still counts as zero.
    zero: Vec<(usize, f64)>,
    samples: usize,
}

impl ApproxTarget {
    fn new(target: &Target, profiles: &[&MonthlyProfile], metric: &MetricConfig) -> Self {
        let mut t = ApproxTarget {
            months: Vec::new(),
            actual: Vec::new(),
            scale: Vec::new(),
            zero: Vec::new(),
            samples: 0,
        };
        for &m in &target.months {
            let a = target.actual[m];
            if a > 0.0 {
                t.months.push(m);
                t.actual.push(a);
                t.scale.push(100.0 / a);
                t.samples += 1;
            } else if metric.zero_actual_rule == ZeroActualRule::BothZero100 {
                let magnitude: f64 = profiles.iter().map(|p| p.values()[m]).sum();
                t.zero.push((m, magnitude * 1e-11));
                t.samples += 1;
            }
        }
        t
    }

    /// Over-estimates rather than under-estimates when a zero month is in
    /// doubt; the exact re-score settles it.
    #[inline]
    fn score(&self, sums: &[f64; 12], inv_count: f64) -> f64 {
        let mut total = 0.0;
        for ((&m, &a), &scale) in self.months.iter().zip(&self.actual).zip(&self.scale) {
            let p = sums[m] * inv_count;
            total += (100.0 - libm::fabs(p - a) * scale).max(0.0);
        }
        for &(m, tol) in &self.zero {
            if libm::fabs(sums[m]) <= tol {
                total += 100.0;
            }
        }
        total / self.samples as f64
    }
}

fn exact_sum(mask: u32, fixed: &[FixedProfile]) -> ProfileSum {
    let mut sum = ProfileSum::new();
    for (i, f) in fixed.iter().enumerate() {
        if mask & (1 << i) != 0 {
            sum.add(f);
        }
    }
    sum
}

fn exhaustive(profiles: &[&MonthlyProfile], target: &Target, metric: &MetricConfig) -> Result<(Vec<bool>, f64)> {
    let n = profiles.len();
    let fixed: Vec<FixedProfile> = profiles.iter().map(|p| FixedProfile::from(*p)).collect();
    let approx_target = ApproxTarget::new(target, profiles, metric);
    if approx_target.samples == 0 {
        return Err(Error::NoSamples);
    }
    let inv_count: Vec<f64> = (0..=n).map(|c| if c == 0 { 0.0 } else { 1.0 / c as f64 }).collect();
    let mut approx = [0.0f64; 12];
    let mut best: Option<Best> = None;
    let mut threshold = f64::NEG_INFINITY;
    let mut gray = 0u32;
    let mut count = 0usize;

    for step in 1u64..(1u64 << n) {
        let bit = step.trailing_zeros() as usize;
        gray ^= 1 << bit;
        let values = profiles[bit].values();
        if gray & (1 << bit) != 0 {
            count += 1;
            for (s, v) in approx.iter_mut().zip(values) {
                *s += v;
            }
        } else {
            count -= 1;
            for (s, v) in approx.iter_mut().zip(values) {
                *s -= v;
            }
        }
        if step % RESYNC_PERIOD == 0 {
            let exact = exact_sum(gray, &fixed);
            for (m, s) in approx.iter_mut().enumerate() {
                *s = exact.month_mean(m) * count as f64;
            }
        }
        if count == 0 || approx_target.score(&approx, inv_count[count]) < threshold {
            continue;
        }
        let Some(accuracy) = target.score_exact(&exact_sum(gray, &fixed), metric) else {
            continue;
        };
        if best.is_none_or(|b| b.improved_by(accuracy, gray)) {
            best = Some(Best { accuracy, mask: gray });
            threshold = accuracy - RESCORE_MARGIN;
        }
    }
    let best = best.ok_or(Error::NoSamples)?;
    let mask = (0..n).map(|i| best.mask & (1 << i) != 0).collect();
    Ok((mask, best.accuracy))
}

fn greedy(profiles: &[&MonthlyProfile], target: &Target, metric: &MetricConfig) -> Result<(Vec<bool>, f64)> {
    let fixed: Vec<FixedProfile> = profiles.iter().map(|p| FixedProfile::from(*p)).collect();
    let mut chosen = alloc::vec![false; profiles.len()];
    let mut current = ProfileSum::new();
    let mut current_accuracy: Option<f64> = None;
    loop {
        let mut step_best: Option<(usize, f64)> = None;
        for (i, f) in fixed.iter().enumerate() {
            if chosen[i] {
                continue;
            }
            let mut trial = current;
            trial.add(f);
            let Some(acc) = target.score_exact(&trial, metric) else {
                continue;
            };
            // Candidates are in ascending id order, so strict `>` keeps the
            // smallest id on ties.
            if step_best.is_none_or(|(_, b)| acc > b) {
                step_best = Some((i, acc));
            }
        }
        match (step_best, current_accuracy) {
            (Some((i, acc)), None) => {
                chosen[i] = true;
                current.add(&fixed[i]);
                current_accuracy = Some(acc);
            }
            (Some((i, acc)), Some(cur)) if acc > cur => {
                chosen[i] = true;
                current.add(&fixed[i]);
                current_accuracy = Some(acc);
            }
            _ => break,
        }
    }
    let accuracy = current_accuracy.ok_or(Error::NoSamples)?;
    Ok((chosen, accuracy))
}

/// Predicted profile for an oracle subset: the exact mean of its members.
pub fn subset_prediction(
    corpus_homes: &[&HomeRecord],
    subset: &[HomeId],
    appliance: &ApplianceKind,
) -> Result<MonthlyProfile> {
    let mut sum = ProfileSum::new();
    for id in subset {
        let home = corpus_homes
            .iter()
            .find(|h| &h.home_id == id)
            .ok_or_else(|| Error::UnknownHome(id.clone()))?;
        sum.add(&FixedProfile::from(home.appliance(appliance)?));
    }
    sum.mean().ok_or(Error::NoCandidates)
}
