use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::hmm::{ApplianceHmm, Gaussian};
use super::trace::{month_segments, MinuteTrace};
use crate::dataset::{ApplianceKind, MonthlyProfile};
use crate::{Error, Result};

pub const MAX_FHMM_APPLIANCES: usize = 5;

/// Independent two-state appliance chains observed through their summed
/// power. Joint state `s` has appliance `i` ON iff bit `i` of `s` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhmmModel {
    hmms: Vec<ApplianceHmm>,
}

impl FhmmModel {
    pub fn new(hmms: Vec<ApplianceHmm>) -> Result<Self> {
        if hmms.is_empty() || hmms.len() > MAX_FHMM_APPLIANCES {
            return Err(Error::ModelSize(hmms.len()));
        }
        for h in &hmms {
            h.validate()?;
        }
        Ok(FhmmModel { hmms })
    }

    pub fn appliances(&self) -> impl Iterator<Item = &ApplianceKind> {
        self.hmms.iter().map(|h| &h.appliance)
    }

    pub fn hmms(&self) -> &[ApplianceHmm] {
        &self.hmms
    }

    pub fn joint_state_count(&self) -> usize {
        1 << self.hmms.len()
    }

    /// Summed means and variances of the members' current states.
    pub fn joint_emission(&self, state: usize) -> Gaussian {
        let (mut mean, mut var) = (0.0, 0.0);
        for (i, h) in self.hmms.iter().enumerate() {
            let g = &h.emission[(state >> i) & 1];
            mean += g.mean_w;
            var += g.std_w * g.std_w;
        }
        Gaussian {
            mean_w: mean,
            std_w: libm::sqrt(var),
        }
    }
}

/// Most probable joint state per minute.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPath {
    pub states: Vec<u8>,
    pub log_prob: f64,
}

impl DecodedPath {
    pub fn appliance_on(&self, minute: usize, appliance_index: usize) -> bool {
        (self.states[minute] >> appliance_index) & 1 == 1
    }
}

impl FhmmModel {
    /// Exact Viterbi over the product chain.
    ///
    /// Because the joint transition factorises over appliances, the max over
    /// predecessor states is taken one appliance dimension at a time, which
    /// costs `2^n * n * 2` per minute instead of `4^n`. Ties prefer the
    /// predecessor bit 0 and, at the end, the lowest joint state.
    pub fn viterbi(&self, aggregate_w: &[f64]) -> DecodedPath {
        let n = self.hmms.len();
        let s_count = self.joint_state_count();
        let t_len = aggregate_w.len();
        if t_len == 0 {
            return DecodedPath {
                states: Vec::new(),
                log_prob: 0.0,
            };
        }
        let emissions: Vec<Gaussian> = (0..s_count).map(|s| self.joint_emission(s)).collect();
        let log_a: Vec<[[f64; 2]; 2]> = self
            .hmms
            .iter()
            .map(|h| h.transition.map(|row| row.map(libm::log)))
            .collect();

        let mut delta = vec![0.0f64; s_count];
        for (s, d) in delta.iter_mut().enumerate() {
            let mut lp = 0.0;
            for (i, h) in self.hmms.iter().enumerate() {
                lp += libm::log(h.pi[(s >> i) & 1]);
            }
            *d = lp + emissions[s].log_pdf(aggregate_w[0]);
        }

        // back[t * n + j] bit x: predecessor bit j chosen for intermediate state x.
        let mut back = vec![0u32; t_len.saturating_sub(1) * n];
        let mut scratch = vec![0.0f64; s_count];
        for t in 1..t_len {
            for (j, a) in log_a.iter().enumerate() {
                let bit = 1usize << j;
                let mut mask = 0u32;
                for x in 0..s_count {
                    let cur = (x >> j) & 1;
                    let via0 = delta[x & !bit] + a[0][cur];
                    let via1 = delta[x | bit] + a[1][cur];
                    if via1 > via0 {
                        scratch[x] = via1;
                        mask |= 1 << x;
                    } else {
                        scratch[x] = via0;
                    }
                }
                back[(t - 1) * n + j] = mask;
                core::mem::swap(&mut delta, &mut scratch);
            }
            let x_t = aggregate_w[t];
            for (s, d) in delta.iter_mut().enumerate() {
                *d += emissions[s].log_pdf(x_t);
            }
        }

        let (mut state, mut best) = (0usize, f64::NEG_INFINITY);
        for (s, d) in delta.iter().enumerate() {
            if *d > best {
                best = *d;
                state = s;
            }
        }
        let mut states = vec![0u8; t_len];
        states[t_len - 1] = state as u8;
        for t in (1..t_len).rev() {
            for j in (0..n).rev() {
                let chose_one = (back[(t - 1) * n + j] >> state) & 1 == 1;
                if chose_one {
                    state |= 1 << j;
                } else {
                    state &= !(1 << j);
                }
            }
            states[t - 1] = state as u8;
        }
        DecodedPath { states, log_prob: best }
    }

    /// Per-appliance power implied by a decoded path.
    pub fn powers(&self, path: &DecodedPath) -> BTreeMap<ApplianceKind, Vec<f64>> {
        self.hmms
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let series = path
                    .states
                    .iter()
                    .map(|s| h.emission[usize::from((s >> i) & 1)].mean_w)
                    .collect();
                (h.appliance.clone(), series)
            })
            .collect()
    }
}

/// Decodes `aggregate_w` and returns each modelled appliance's minute power:
/// the emission mean of its decoded state.
pub fn fhmm_decode(model: &FhmmModel, aggregate_w: &[f64]) -> BTreeMap<ApplianceKind, Vec<f64>> {
    model.powers(&model.viterbi(aggregate_w))
}

/// Sums minute powers into kWh per calendar month.
pub fn monthly_energy(start: NaiveDateTime, power_w: &[f64]) -> MonthlyProfile {
    let mut out = [0.0; 12];
    for seg in month_segments(start, power_w.len()) {
        let watt_minutes: f64 = power_w[seg.range].iter().sum();
        out[usize::from(seg.month) - 1] += watt_minutes / 60.0 / 1000.0;
    }
    MonthlyProfile::new_unchecked(out)
}

/// Decodes the trace aggregate and integrates each appliance per month;
/// months absent from the trace are zero.
pub fn fhmm_monthly(trace: &MinuteTrace, model: &FhmmModel) -> BTreeMap<ApplianceKind, MonthlyProfile> {
    fhmm_decode(model, &trace.aggregate_w)
        .into_iter()
        .map(|(k, p)| (k, monthly_energy(trace.start, &p)))
        .collect()
}
