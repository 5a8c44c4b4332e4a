//! Leave-one-out accuracy against a direct recomputation that shares no code
//! with the library beyond the corpus itself.

use nilm_core::evaluation::evaluate_loocv;
use nilm_core::syndata::{generate_corpus, GeneratorConfig};
use nilm_core::{ApplianceKind, Corpus, DistanceKind, FeatureSubset, FeatureUnit, HomeRecord, MetricConfig};

#[derive(Clone, Copy)]
struct Pick {
    raw: bool,
    derived: bool,
    area: bool,
    occupants: bool,
    rooms: bool,
}

fn features(h: &HomeRecord, pick: Pick) -> Vec<f64> {
    let v = h.aggregate.values();
    let mut out = Vec::new();
    if pick.raw {
        out.extend_from_slice(v);
    }
    if pick.derived {
        let mean = v.iter().sum::<f64>() / 12.0;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 12.0;
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        out.extend([var, min / max, max - min, (max - min) / max]);
    }
    if pick.area {
        out.push(h.statics.area_sqft);
    }
    if pick.occupants {
        out.push(h.statics.occupants as f64);
    }
    if pick.rooms {
        out.push(h.statics.rooms as f64);
    }
    out
}

fn scripted(
    corpus: &Corpus,
    appliance: &ApplianceKind,
    k: usize,
    pick: Pick,
    manhattan: bool,
    months: &[usize],
) -> f64 {
    let homes = corpus.homes();
    let (mut total, mut n) = (0.0, 0usize);
    for (i, test) in homes.iter().enumerate() {
        let others: Vec<&HomeRecord> = homes
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, h)| h)
            .collect();
        let raw: Vec<Vec<f64>> = others.iter().map(|h| features(h, pick)).collect();
        let dims = raw[0].len();
        let lo: Vec<f64> = (0..dims)
            .map(|d| raw.iter().map(|r| r[d]).fold(f64::MAX, f64::min))
            .collect();
        let hi: Vec<f64> = (0..dims)
            .map(|d| raw.iter().map(|r| r[d]).fold(f64::MIN, f64::max))
            .collect();
        let norm = |x: &[f64]| -> Vec<f64> {
            (0..dims)
                .map(|d| {
                    if hi[d] > lo[d] {
                        (x[d] - lo[d]) / (hi[d] - lo[d])
                    } else {
                        0.5
                    }
                })
                .collect()
        };
        let t = norm(&features(test, pick));
        let mut ranked: Vec<(f64, &str, &HomeRecord)> = others
            .iter()
            .zip(&raw)
            .map(|(h, r)| {
                let x = norm(r);
                let d = if manhattan {
                    x.iter().zip(&t).map(|(a, b)| (a - b).abs()).sum()
                } else {
                    x.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                };
                (d, h.home_id.as_str(), *h)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
        let actual = test.appliances[appliance].values();
        for &m in months {
            let predicted = ranked[..k]
                .iter()
                .map(|(_, _, h)| h.appliances[appliance].values()[m])
                .sum::<f64>()
                / k as f64;
            total += 100.0 * (1.0 - ((predicted - actual[m]).abs() / actual[m]).min(1.0));
            n += 1;
        }
    }
    total / n as f64
}

#[test]
fn fridge_k3_raw_derived_rooms() {
    let corpus = generate_corpus(&GeneratorConfig::default()).unwrap();
    let pick = Pick {
        raw: true,
        derived: true,
        area: false,
        occupants: false,
        rooms: true,
    };
    let subset =
        FeatureSubset::new(&[FeatureUnit::RawMonthly, FeatureUnit::DerivedMonthly, FeatureUnit::Rooms]).unwrap();
    let months: Vec<usize> = (0..12).collect();
    let expected = scripted(&corpus, &ApplianceKind::Fridge, 3, pick, false, &months);
    let got = evaluate_loocv(
        &corpus,
        &ApplianceKind::Fridge,
        3,
        subset,
        DistanceKind::Euclidean,
        &MetricConfig::default(),
    )
    .unwrap();
    assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
}

#[test]
fn hvac_k5_area_occupants_manhattan() {
    let corpus = generate_corpus(&GeneratorConfig {
        seed: 7,
        n_homes: 18,
        ..GeneratorConfig::default()
    })
    .unwrap();
    let pick = Pick {
        raw: false,
        derived: false,
        area: true,
        occupants: true,
        rooms: false,
    };
    let subset = FeatureSubset::new(&[FeatureUnit::Area, FeatureUnit::Occupants]).unwrap();
    // May to October.
    let months: Vec<usize> = (4..10).collect();
    let expected = scripted(&corpus, &ApplianceKind::Hvac, 5, pick, true, &months);
    let got = evaluate_loocv(
        &corpus,
        &ApplianceKind::Hvac,
        5,
        subset,
        DistanceKind::Manhattan,
        &MetricConfig::default(),
    )
    .unwrap();
    assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
}
