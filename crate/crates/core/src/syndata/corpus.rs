use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{ApplianceKind, Corpus, HomeId, HomeRecord, MonthlyProfile, StaticCharacteristics};
use crate::evaluation::MetricConfig;
use crate::Result;

use super::{home_rng, GeneratorConfig};

/// Cooling demand shape for 1-based `month`, peaking between July and August.
pub fn seasonal_cooling(month: u8) -> f64 {
    libm::cos(2.0 * PI * (f64::from(month) - 7.5) / 12.0).max(0.0)
}

/// Heating demand shape, the mirror of [`seasonal_cooling`].
pub fn seasonal_heating(month: u8) -> f64 {
    (-libm::cos(2.0 * PI * (f64::from(month) - 7.5) / 12.0)).max(0.0)
}

/// Ids `h01`, `h02`, ... zero-padded so lexicographic order is numeric order.
pub fn home_ids(n: usize) -> Vec<HomeId> {
    let width = digits(n).max(2);
    (1..=n).map(|i| HomeId::new(format!("h{i:0width$}"))).collect()
}

fn digits(mut n: usize) -> usize {
    let mut d = 1;
    while n >= 10 {
        n /= 10;
        d += 1;
    }
    d
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Area ~ U(1000, 4000) rounded to 10 sq ft; occupants ~ U{1..6}; rooms
/// about one per 450 sq ft, jittered by one and clamped to 2..=12.
pub fn generate_statics(rng: &mut ChaCha8Rng) -> StaticCharacteristics {
    let area = libm::round(rng.random_range(1000.0..4000.0) / 10.0) * 10.0;
    let occupants = rng.random_range(1..=6u32);
    let jitter = rng.random_range(-1..=1i32);
    let rooms = (libm::round(area / 450.0) as i32 + jitter).clamp(2, 12) as u32;
    StaticCharacteristics {
        area_sqft: area,
        occupants,
        rooms,
    }
}

/// Monthly profiles of one home with the given statics. Draws from the
/// home's own stream after the statics draws.
pub fn generate_home(config: &GeneratorConfig, home_id: HomeId, statics: StaticCharacteristics) -> Result<HomeRecord> {
    config.validate()?;
    let mut rng = home_rng(config.seed, &home_id, 0);
    generate_statics(&mut rng);
    build_home(config, home_id, statics, &mut rng)
}

fn build_home(
    config: &GeneratorConfig,
    home_id: HomeId,
    statics: StaticCharacteristics,
    rng: &mut ChaCha8Rng,
) -> Result<HomeRecord> {
    let c = &config.couplings;
    let ksqft = statics.area_sqft / 1000.0;
    let occupants = f64::from(statics.occupants);

    // Factors for every modelled appliance are drawn even when the appliance
    // is not selected, so a home's values do not depend on the selection.
    let mut factor = BTreeMap::new();
    for kind in ApplianceKind::EVALUATED {
        let f = libm::exp(config.home_spread * normal(rng));
        factor.insert(kind, f);
    }
    let residual_factor = libm::exp(config.home_spread * normal(rng));
    // Cooling season width (thermostat setpoint) and heating type vary per
    // home, so homes differ in the shape of their year and not only its scale.
    let threshold = rng.random_range(0.0..=1.0) * config.hvac_season_spread;
    let electric_heat = rng.random_bool(config.electric_heating_share);

    let mut jitter = || (1.0 + config.monthly_kwh_sigma * normal(rng)).max(0.0);

    let mut appliances = BTreeMap::new();
    let mut total = [0.0; 12];
    for kind in ApplianceKind::EVALUATED {
        let f = factor[&kind];
        let mut values = [0.0; 12];
        for (m, v) in values.iter_mut().enumerate() {
            let month = m as u8 + 1;
            let (cool, heat) = (seasonal_cooling(month), seasonal_heating(month));
            let season = ((cool - threshold) / (1.0 - threshold)).max(0.0);
            let heat_load = if electric_heat { heat } else { 0.0 };
            let base = match kind {
                ApplianceKind::Fridge => {
                    (c.fridge_base_kwh + c.fridge_per_room_kwh * f64::from(statics.rooms)) * (1.0 + 0.08 * cool)
                }
                ApplianceKind::Hvac => {
                    ksqft
                        * (c.hvac_base_kwh_per_ksqft
                            + config.hvac_amplitude_kwh * season
                            + c.hvac_heating_kwh_per_ksqft * heat_load)
                }
                ApplianceKind::WashingMachine => c.washing_machine_per_occupant_kwh * occupants,
                ApplianceKind::DishWasher => c.dish_washer_per_occupant_kwh * occupants,
                ApplianceKind::Dryer => c.dryer_per_occupant_kwh * occupants,
                ApplianceKind::Lights => c.lights_per_sqft_kwh * statics.area_sqft * (1.0 + 0.25 * heat),
                ApplianceKind::Other(_) => unreachable!("generator appliances are validated"),
            };
            *v = base * f * jitter();
        }
        if config.appliances.contains(&kind) {
            for (t, v) in total.iter_mut().zip(&values) {
                *t += v;
            }
            appliances.insert(kind, MonthlyProfile::new(values)?);
        }
    }
    let mut aggregate = [0.0; 12];
    for (a, t) in aggregate.iter_mut().zip(&total) {
        let residual = (c.residual_base_kwh + c.residual_per_occupant_kwh * occupants) * residual_factor * jitter();
        *a = t + residual;
    }
    Ok(HomeRecord {
        home_id,
        statics,
        aggregate: MonthlyProfile::new(aggregate)?,
        appliances,
    })
}

/// A corpus of `config.n_homes` homes with ground truth for every selected
/// appliance.
pub fn generate_corpus(config: &GeneratorConfig) -> Result<Corpus> {
    config.validate()?;
    let homes = home_ids(config.n_homes)
        .into_iter()
        .map(|id| {
            let mut rng = home_rng(config.seed, &id, 0);
            let statics = generate_statics(&mut rng);
            build_home(config, id, statics, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(homes, MetricConfig::default(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    fn quiet() -> GeneratorConfig {
        GeneratorConfig {
            monthly_kwh_sigma: 0.0,
            minute_w_sigma: 0.0,
            home_spread: 0.0,
            hvac_season_spread: 0.0,
            electric_heating_share: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn ids_sort_numerically() {
        let ids = home_ids(12);
        assert_eq!(ids[0].as_str(), "h01");
        assert_eq!(ids[11].as_str(), "h12");
        assert!(ids.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(home_ids(100)[0].as_str(), "h001");
    }

    #[test]
    fn identical_statics_without_noise_give_identical_profiles() {
        let statics = StaticCharacteristics {
            area_sqft: 2000.0,
            occupants: 3,
            rooms: 4,
        };
        let a = generate_home(&quiet(), "x".into(), statics).unwrap();
        let b = generate_home(&quiet(), "y".into(), statics).unwrap();
        assert_eq!(a.aggregate, b.aggregate);
        assert_eq!(a.appliances, b.appliances);
    }

    #[test]
    fn planted_couplings_without_noise() {
        let statics = StaticCharacteristics {
            area_sqft: 2000.0,
            occupants: 3,
            rooms: 4,
        };
        let h = generate_home(&quiet(), "x".into(), statics).unwrap();
        let wm = h.appliance(&ApplianceKind::WashingMachine).unwrap();
        assert!(wm.values().iter().all(|v| (*v - 24.0).abs() < 1e-12));
        let dryer = h.appliance(&ApplianceKind::Dryer).unwrap();
        assert!(dryer.values().iter().all(|v| (*v - 66.0).abs() < 1e-12));
        let hvac = h.appliance(&ApplianceKind::Hvac).unwrap();
        // July: 2 * (20 + 350 cos(pi/12)).
        let july = 2.0 * (20.0 + 350.0 * libm::cos(PI / 12.0));
        assert!((hvac.month(7) - july).abs() < 1e-9);
        let sum: f64 = h.appliances.values().map(|p| p.month(7)).sum();
        assert!((h.aggregate.month(7) - sum - 225.0).abs() < 1e-9);
    }

    #[test]
    fn default_corpus_properties() {
        let config = GeneratorConfig::default();
        let corpus = generate_corpus(&config).unwrap();
        assert_eq!(corpus.len(), 25);
        for h in corpus.homes() {
            h.validate(0.0).unwrap();
            let hvac = h.appliance(&ApplianceKind::Hvac).unwrap();
            assert!(hvac.month(7) > hvac.month(1), "{}", h.home_id);
            assert!((1000.0..=4000.0).contains(&h.statics.area_sqft));
            assert!((1..=6).contains(&h.statics.occupants));
            assert!((2..=12).contains(&h.statics.rooms));
            assert_eq!(h.appliances.len(), 6);
        }
        assert_eq!(generate_corpus(&config).unwrap(), corpus);
        let other = generate_corpus(&GeneratorConfig {
            seed: 43,
            ..config.clone()
        })
        .unwrap();
        assert_ne!(other, corpus);
    }

    #[test]
    fn home_values_do_not_depend_on_corpus_size() {
        let small = generate_corpus(&GeneratorConfig {
            n_homes: 5,
            ..Default::default()
        })
        .unwrap();
        let large = generate_corpus(&GeneratorConfig {
            n_homes: 9,
            ..Default::default()
        })
        .unwrap();
        for h in small.homes() {
            assert_eq!(Some(h), large.get(&h.home_id));
        }
    }

    #[test]
    fn zero_homes_rejected() {
        let config = GeneratorConfig {
            n_homes: 0,
            ..Default::default()
        };
        assert!(matches!(generate_corpus(&config), Err(Error::InvalidConfig(_))));
    }
}
