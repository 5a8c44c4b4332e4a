//! Seeded synthetic corpora and minute traces.
//!
//! All randomness comes from ChaCha8 streams: `ChaCha8Rng::seed_from_u64(seed)`
//! with the stream number set to the FNV-1a hash of the home id (monthly
//! profiles) or that hash XOR [`TRACE_STREAM_TAG`] (minute traces). Homes are
//! therefore independent of each other and of generation order.
//!
//! Planted couplings: HVAC follows a summer-peaking seasonal curve scaled by
//! floor area; washing machine, dish washer and dryer scale with occupants;
//! lights scale with area; the fridge grows slowly with room count.

mod corpus;
mod trace;

use alloc::format;
use alloc::vec::Vec;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ApplianceKind, HomeId};
use crate::{Error, Result};

pub use corpus::{generate_corpus, generate_home, generate_statics, home_ids, seasonal_cooling, seasonal_heating};
pub use trace::{duty_cycle, generate_trace, nominal_on_power_w, run_length_minutes, two_state_series};

pub const TRACE_STREAM_TAG: u64 = 0x7472_6163_6573_0001;

/// Per-unit coupling coefficients, in kWh per month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Couplings {
    pub fridge_base_kwh: f64,
    pub fridge_per_room_kwh: f64,
    pub hvac_base_kwh_per_ksqft: f64,
    pub hvac_heating_kwh_per_ksqft: f64,
    pub washing_machine_per_occupant_kwh: f64,
    pub dish_washer_per_occupant_kwh: f64,
    pub dryer_per_occupant_kwh: f64,
    pub lights_per_sqft_kwh: f64,
    pub residual_base_kwh: f64,
    pub residual_per_occupant_kwh: f64,
}

impl Default for Couplings {
    fn default() -> Self {
        Couplings {
            fridge_base_kwh: 25.0,
            fridge_per_room_kwh: 3.0,
            hvac_base_kwh_per_ksqft: 20.0,
            hvac_heating_kwh_per_ksqft: 60.0,
            washing_machine_per_occupant_kwh: 8.0,
            dish_washer_per_occupant_kwh: 10.0,
            dryer_per_occupant_kwh: 22.0,
            lights_per_sqft_kwh: 0.06,
            residual_base_kwh: 120.0,
            residual_per_occupant_kwh: 35.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_homes: usize,
    pub appliances: Vec<ApplianceKind>,
    /// Relative standard deviation of each monthly energy value.
    pub monthly_kwh_sigma: f64,
    /// Standard deviation of the additive minute noise on the aggregate, W.
    pub minute_w_sigma: f64,
    /// Log-scale spread of the per-home appliance factors.
    pub home_spread: f64,
    /// Peak summer cooling energy per 1000 sq ft, kWh per month.
    pub hvac_amplitude_kwh: f64,
    /// Upper bound of the per-home cooling threshold in `[0, 1)`: 0 gives
    /// every home the full summer curve, larger values shorten some homes'
    /// cooling seasons.
    pub hvac_season_spread: f64,
    /// Probability that a home heats electrically.
    pub electric_heating_share: f64,
    pub couplings: Couplings,
    /// First day of the minute traces.
    pub trace_start: NaiveDate,
    /// Day after the last day of the minute traces.
    pub trace_end: NaiveDate,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 42,
            n_homes: 25,
            appliances: ApplianceKind::EVALUATED.to_vec(),
            monthly_kwh_sigma: 0.05,
            minute_w_sigma: 20.0,
            home_spread: 0.15,
            hvac_amplitude_kwh: 350.0,
            hvac_season_spread: 0.6,
            electric_heating_share: 0.5,
            couplings: Couplings::default(),
            trace_start: NaiveDate::from_ymd_opt(2013, 1, 1).expect("valid date"),
            trace_end: NaiveDate::from_ymd_opt(2014, 1, 1).expect("valid date"),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if self.n_homes == 0 {
            return bad("n_homes must be at least 1".into());
        }
        if self.appliances.is_empty() {
            return bad("appliance set is empty".into());
        }
        if let Some(a) = self.appliances.iter().find(|a| !a.is_evaluated()) {
            return bad(format!("generator has no model for appliance {a}"));
        }
        for (name, v) in [
            ("monthly_kwh_sigma", self.monthly_kwh_sigma),
            ("minute_w_sigma", self.minute_w_sigma),
            ("home_spread", self.home_spread),
            ("hvac_amplitude_kwh", self.hvac_amplitude_kwh),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.hvac_season_spread) {
            return bad(format!(
                "hvac_season_spread must lie in [0, 1), got {}",
                self.hvac_season_spread
            ));
        }
        if !(0.0..=1.0).contains(&self.electric_heating_share) {
            return bad(format!(
                "electric_heating_share must lie in [0, 1], got {}",
                self.electric_heating_share
            ));
        }
        let c = &self.couplings;
        for v in [
            c.fridge_base_kwh,
            c.fridge_per_room_kwh,
            c.hvac_base_kwh_per_ksqft,
            c.hvac_heating_kwh_per_ksqft,
            c.washing_machine_per_occupant_kwh,
            c.dish_washer_per_occupant_kwh,
            c.dryer_per_occupant_kwh,
            c.lights_per_sqft_kwh,
            c.residual_base_kwh,
            c.residual_per_occupant_kwh,
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!(
                    "coupling coefficients must be finite and non-negative, got {v}"
                ));
            }
        }
        if self.trace_end <= self.trace_start {
            return bad(format!("trace range {}..{} is empty", self.trace_start, self.trace_end));
        }
        Ok(())
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn home_rng(seed: u64, home: &HomeId, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(home.as_str().as_bytes()) ^ tag);
    rng
}
