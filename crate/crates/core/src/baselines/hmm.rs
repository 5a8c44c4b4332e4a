use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::trace::{MinuteTrace, TrainWindow};
use crate::dataset::ApplianceKind;
use crate::{Error, Result};

/// Lower bound on per-state emission standard deviation.
pub const DEFAULT_STD_FLOOR_W: f64 = 5.0;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean_w: f64,
    pub std_w: f64,
}

impl Gaussian {
    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean_w) / self.std_w;
        -0.5 * (LN_2PI + z * z) - libm::log(self.std_w)
    }
}

/// Two-state (OFF = 0, ON = 1) appliance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceHmm {
    pub appliance: ApplianceKind,
    pub pi: [f64; 2],
    /// `transition[from][to]`.
    pub transition: [[f64; 2]; 2],
    pub emission: [Gaussian; 2],
}

impl ApplianceHmm {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidHmm(format!("{}: {msg}", self.appliance)));
        let stochastic =
            |row: &[f64; 2]| row.iter().all(|p| (0.0..=1.0).contains(p)) && libm::fabs(row[0] + row[1] - 1.0) <= 1e-9;
        if !stochastic(&self.pi) {
            return bad("initial distribution must sum to 1");
        }
        if !self.transition.iter().all(stochastic) {
            return bad("transition rows must sum to 1");
        }
        if !(self.emission[0].mean_w < self.emission[1].mean_w) {
            return bad("OFF mean must be below ON mean");
        }
        if !self.emission.iter().all(|g| g.std_w > 0.0 && g.std_w.is_finite()) {
            return bad("emission std must be positive");
        }
        Ok(())
    }

    /// Long-run fraction of minutes spent ON.
    pub fn stationary_on_probability(&self) -> f64 {
        let on = self.transition[0][1];
        let off = self.transition[1][0];
        on / (on + off)
    }

    /// Model for an appliance whose training signal never changes: the
    /// observed level becomes the ON state (or the floor, for an all-zero
    /// signal) and a synthetic OFF state sits at 0 W.
    pub fn constant_fallback(
        appliance: ApplianceKind,
        value_w: f64,
        window_len: usize,
        day_count: usize,
        floor_w: f64,
    ) -> Self {
        let on = value_w > 0.0;
        let states: Vec<bool> = alloc::vec![on; window_len.max(1)];
        let day_starts: Vec<usize> = (0..day_count.max(1))
            .map(|d| (d * 1440).min(states.len() - 1))
            .collect();
        let (pi, transition) = count_chain(&states, &day_starts);
        ApplianceHmm {
            appliance,
            pi,
            transition,
            emission: [
                Gaussian {
                    mean_w: 0.0,
                    std_w: floor_w,
                },
                Gaussian {
                    mean_w: if on { value_w } else { floor_w },
                    std_w: floor_w,
                },
            ],
        }
    }
}

// Add-one smoothed initial distribution and transition matrix.
fn count_chain(states: &[bool], day_starts: &[usize]) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut first = [1.0f64; 2];
    for &d in day_starts {
        first[usize::from(states[d])] += 1.0;
    }
    let mut counts = [[1.0f64; 2]; 2];
    for w in states.windows(2) {
        counts[usize::from(w[0])][usize::from(w[1])] += 1.0;
    }
    let pi_total = first[0] + first[1];
    let pi = [first[0] / pi_total, first[1] / pi_total];
    let mut a = [[0.0; 2]; 2];
    for (row, c) in a.iter_mut().zip(counts.iter()) {
        let total = c[0] + c[1];
        *row = [c[0] / total, c[1] / total];
    }
    (pi, a)
}

// One-dimensional 2-means seeded at the extremes; returns the split threshold.
fn two_means_threshold(values: &[f64], min: f64, max: f64) -> f64 {
    let (mut low, mut high) = (min, max);
    let mut threshold = 0.5 * (low + high);
    for _ in 0..100 {
        let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
        for &x in values {
            if x > threshold {
                s1 += x;
                n1 += 1;
            } else {
                s0 += x;
                n0 += 1;
            }
        }
        let (new_low, new_high) = (s0 / n0 as f64, s1 / n1 as f64);
        if new_low == low && new_high == high {
            break;
        }
        low = new_low;
        high = new_high;
        threshold = 0.5 * (low + high);
    }
    threshold
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, libm::sqrt(var))
}

/// Fits a two-state HMM to one appliance's submetered minutes in `window`.
///
/// States come from 2-means clustering (OFF is the lower cluster); the
/// initial distribution counts each day's first-minute state, transitions
/// count consecutive minute pairs, both add-one smoothed. Emissions are the
/// cluster mean and `max(cluster std, floor_w)`.
pub fn train_hmm(
    trace: &MinuteTrace,
    appliance: &ApplianceKind,
    window: &TrainWindow,
    floor_w: f64,
) -> Result<ApplianceHmm> {
    if !(floor_w > 0.0) {
        return Err(Error::InvalidConfig("std floor must be positive".into()));
    }
    let series = trace
        .submetered_w
        .get(appliance)
        .ok_or_else(|| Error::MissingApplianceData {
            home: trace.home_id.clone(),
            appliance: appliance.clone(),
        })?;
    let range = trace.window_range(window)?;
    let values = &series[range.clone()];
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Err(Error::ConstantSignal {
            appliance: appliance.clone(),
            value_w: min,
        });
    }
    let threshold = two_means_threshold(values, min, max);
    let states: Vec<bool> = values.iter().map(|x| *x > threshold).collect();
    let day_starts: Vec<usize> = trace
        .day_starts(range.clone())
        .into_iter()
        .map(|i| i - range.start)
        .collect();
    let (pi, transition) = count_chain(&states, &day_starts);
    let cluster = |on: bool| {
        let it = values
            .iter()
            .zip(&states)
            .filter(move |(_, s)| **s == on)
            .map(|(x, _)| *x);
        let (mean, std) = mean_std(it);
        Gaussian {
            mean_w: mean,
            std_w: std.max(floor_w),
        }
    };
    let hmm = ApplianceHmm {
        appliance: appliance.clone(),
        pi,
        transition,
        emission: [cluster(false), cluster(true)],
    };
    hmm.validate()?;
    Ok(hmm)
}

/// [`train_hmm`], replacing a constant signal by
/// [`ApplianceHmm::constant_fallback`].
pub fn train_hmm_or_fallback(
    trace: &MinuteTrace,
    appliance: &ApplianceKind,
    window: &TrainWindow,
    floor_w: f64,
) -> Result<ApplianceHmm> {
    match train_hmm(trace, appliance, window, floor_w) {
        Err(Error::ConstantSignal { value_w, .. }) => {
            let range = trace.window_range(window)?;
            let days = trace.day_starts(range.clone()).len();
            Ok(ApplianceHmm::constant_fallback(
                appliance.clone(),
                value_w,
                range.len(),
                days,
                floor_w,
            ))
        }
        other => other,
    }
}
