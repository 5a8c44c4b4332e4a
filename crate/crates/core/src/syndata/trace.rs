use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use chrono::{Datelike, Duration, NaiveDate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::baselines::{month_segments, MinuteTrace};
use crate::dataset::{ApplianceKind, HomeRecord};
use crate::{Error, Result};

use super::{home_rng, GeneratorConfig, TRACE_STREAM_TAG};

/// ON power is raised above nominal when needed so no month runs above this
/// duty cycle.
const MAX_DUTY: f64 = 0.95;

pub fn nominal_on_power_w(appliance: &ApplianceKind) -> f64 {
    match appliance {
        ApplianceKind::Fridge => 120.0,
        ApplianceKind::Hvac => 3500.0,
        ApplianceKind::WashingMachine => 500.0,
        ApplianceKind::DishWasher => 1200.0,
        ApplianceKind::Dryer => 3000.0,
        ApplianceKind::Lights => 600.0,
        ApplianceKind::Other(_) => 1000.0,
    }
}

/// Typical length of one ON run.
pub fn run_length_minutes(appliance: &ApplianceKind) -> usize {
    match appliance {
        ApplianceKind::Fridge => 15,
        ApplianceKind::Hvac => 30,
        ApplianceKind::WashingMachine => 45,
        ApplianceKind::DishWasher => 60,
        ApplianceKind::Dryer => 50,
        ApplianceKind::Lights => 120,
        ApplianceKind::Other(_) => 30,
    }
}

/// Fraction of `minutes` an appliance drawing `on_power_w` must be ON to use
/// `energy_kwh`.
pub fn duty_cycle(energy_kwh: f64, on_power_w: f64, minutes: usize) -> f64 {
    energy_kwh * 60_000.0 / (on_power_w * minutes as f64)
}

/// An ON/OFF minute series over `minutes` whose integral is `energy_kwh`.
///
/// The ON minute count is `energy / on_power` rounded; the ON level is then
/// adjusted by the rounding so the integral is exact. ON minutes come in runs
/// of about [`run_length_minutes`], one run per equal slice of the period, at
/// a random offset inside its slice.
pub fn two_state_series(
    appliance: &ApplianceKind,
    month: u8,
    energy_kwh: f64,
    on_power_w: f64,
    minutes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut series = vec![0.0; minutes];
    if energy_kwh <= 0.0 {
        return Ok(series);
    }
    let infeasible = Error::InfeasibleDutyCycle {
        appliance: appliance.clone(),
        month,
        energy_kwh,
        on_power_w,
    };
    if !(on_power_w > 0.0) || duty_cycle(energy_kwh, on_power_w, minutes) > 1.0 {
        return Err(infeasible);
    }
    let wh_minutes = energy_kwh * 60_000.0;
    let on = (libm::round(wh_minutes / on_power_w) as usize).clamp(1, minutes);
    let level = wh_minutes / on as f64;

    let runs = on.div_ceil(run_length_minutes(appliance)).max(1);
    let mut placed = 0;
    for i in 0..runs {
        let seg_start = i * minutes / runs;
        let seg_len = (i + 1) * minutes / runs - seg_start;
        let run = ((i + 1) * on / runs - i * on / runs).min(seg_len);
        let offset = rng.random_range(0..=seg_len - run);
        series[seg_start + offset..seg_start + offset + run].fill(level);
        placed += run;
    }
    // Integer slicing can leave a few minutes unplaced when the duty cycle
    // is close to one.
    for w in series.iter_mut() {
        if placed == on {
            break;
        }
        if *w == 0.0 {
            *w = level;
            placed += 1;
        }
    }
    Ok(series)
}

fn days_in_month(year: i32, month: u32) -> i64 {
    let first = NaiveDate::from_ymd_opt(year, month, 1).expect("valid month");
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    (next - first).num_days()
}

/// Minute trace for a generated home over the configured date range.
///
/// Each month's appliance integrals equal the home's monthly energies (scaled
/// by the covered share of the month when the range cuts a month). The
/// aggregate adds the month's residual energy as a flat baseline plus
/// Gaussian noise, floored at 0 W.
pub fn generate_trace(config: &GeneratorConfig, home: &HomeRecord) -> Result<MinuteTrace> {
    config.validate()?;
    let mut rng = home_rng(config.seed, &home.home_id, TRACE_STREAM_TAG);
    let start = config.trace_start.and_hms_opt(0, 0, 0).expect("midnight");
    let end = config.trace_end.and_hms_opt(0, 0, 0).expect("midnight");
    let len = (end - start).num_minutes() as usize;

    let mut columns: BTreeMap<ApplianceKind, Vec<f64>> = home
        .appliances
        .keys()
        .map(|k| (k.clone(), Vec::with_capacity(len)))
        .collect();
    let mut aggregate = Vec::with_capacity(len);
    for segment in month_segments(start, len) {
        let seg_start = start + Duration::minutes(segment.range.start as i64);
        let month_minutes = days_in_month(seg_start.year(), seg_start.month()) * 1440;
        let seg_len = segment.range.len();
        let coverage = seg_len as f64 / month_minutes as f64;
        let mut sum = vec![0.0; seg_len];
        let mut appliance_kwh = 0.0;
        for (kind, profile) in &home.appliances {
            let energy = profile.month(segment.month) * coverage;
            appliance_kwh += energy;
            let nominal = nominal_on_power_w(kind) * rng.random_range(0.9..1.1);
            let power = nominal.max(energy * 60_000.0 / (MAX_DUTY * seg_len as f64));
            let series = two_state_series(kind, segment.month, energy, power, seg_len, &mut rng)?;
            for (s, w) in sum.iter_mut().zip(&series) {
                *s += w;
            }
            columns.get_mut(kind).expect("column exists").extend(series);
        }
        let residual_kwh = (home.aggregate.month(segment.month) * coverage - appliance_kwh).max(0.0);
        let baseline_w = residual_kwh * 60_000.0 / seg_len as f64;
        for s in sum {
            let noise: f64 = StandardNormal.sample(&mut rng);
            aggregate.push((s + baseline_w + config.minute_w_sigma * noise).max(0.0));
        }
    }
    MinuteTrace::new(home.home_id.clone(), start, aggregate, columns)
}
