use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{ApplianceKind, Corpus, HomeId, MonthlyProfile};
use crate::exact::mean_profile;
use crate::neighbors::{ApplianceEstimate, Method};
use crate::oracle::{OracleResult, SearchMode};
use crate::{Error, Result};

use super::metric::{month_accuracies, MetricConfig, Score};
use super::sweep::{KPoint, SubsetPoint, SweepResult};

pub const SCHEMA_VERSION: u32 = 1;

/// A literature accuracy quoted next to computed results. Never computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAccuracy {
    pub appliance: ApplianceKind,
    pub source_label: String,
    pub accuracy_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub search_mode: SearchMode,
    /// Pooled over every (home, month) sample.
    pub accuracy: f64,
    pub per_home: Vec<OracleResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthPoint {
    pub month: u8,
    pub evaluated: bool,
    pub truth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knn: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub national_average: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fhmm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
}

impl MonthPoint {
    pub fn method(&self, method: Method) -> Option<f64> {
        match method {
            Method::Knn => self.knn,
            Method::NationalAverage => self.national_average,
            Method::Fhmm => self.fhmm,
            Method::Oracle => self.oracle,
        }
    }

    fn set(&mut self, method: Method, value: f64) {
        let slot = match method {
            Method::Knn => &mut self.knn,
            Method::NationalAverage => &mut self.national_average,
            Method::Fhmm => &mut self.fhmm,
            Method::Oracle => &mut self.oracle,
        };
        *slot = Some(value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeSeries {
    pub home_id: HomeId,
    pub truth: MonthlyProfile,
    pub predicted: BTreeMap<Method, MonthlyProfile>,
}

/// Cross-home monthly means per method, plus every home's own series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    pub appliance: ApplianceKind,
    pub months: Vec<MonthPoint>,
    pub homes: Vec<HomeSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplianceReport {
    pub appliance: ApplianceKind,
    pub homes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity_k: Option<Vec<KPoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sensitivity_features: Option<Vec<SubsetPoint>>,
    /// Pooled accuracy per method. KNN uses the optimal configuration.
    pub accuracy: BTreeMap<Method, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    pub monthly: MonthlySeries,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference: Vec<ReferenceAccuracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub metric: MetricConfig,
    pub methods: Vec<Method>,
    pub homes: Vec<HomeId>,
    pub appliances: Vec<ApplianceReport>,
}

impl EvaluationReport {
    pub fn appliance(&self, kind: &ApplianceKind) -> Option<&ApplianceReport> {
        self.appliances.iter().find(|a| &a.appliance == kind)
    }

    /// Every reported accuracy lies in `[0, 100]`.
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| (0.0..=100.0).contains(&x);
        for a in &self.appliances {
            let mut all: Vec<f64> = a.accuracy.values().copied().collect();
            if let Some(s) = &a.sweep {
                all.extend(s.grid.iter().map(|c| c.accuracy));
            }
            if let Some(o) = &a.oracle {
                all.push(o.accuracy);
                all.extend(o.per_home.iter().map(|r| r.best_accuracy));
            }
            if let Some(bad) = all.into_iter().find(|x| !ok(*x)) {
                return Err(Error::InvalidConfig(alloc::format!(
                    "{} accuracy {bad} outside [0, 100]",
                    a.appliance
                )));
            }
        }
        Ok(())
    }
}

/// Estimates of one method for `appliance`, aligned with the corpus homes.
fn aligned<'a>(
    corpus: &Corpus,
    appliance: &ApplianceKind,
    method: Method,
    estimates: &'a [ApplianceEstimate],
) -> Result<Option<Vec<&'a MonthlyProfile>>> {
    let by_home: BTreeMap<&HomeId, &MonthlyProfile> = estimates
        .iter()
        .filter(|e| e.method == method && &e.appliance == appliance)
        .map(|e| (&e.home_id, &e.monthly))
        .collect();
    if by_home.is_empty() {
        return Ok(None);
    }
    corpus
        .homes()
        .iter()
        .map(|h| {
            by_home
                .get(&h.home_id)
                .copied()
                .ok_or_else(|| Error::MissingApplianceData {
                    home: h.home_id.clone(),
                    appliance: appliance.clone(),
                })
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Pooled accuracy of `method`'s estimates over every (home, evaluated
/// month) sample, homes in id order. `None` when the method produced no
/// estimates for `appliance`.
pub fn pooled_accuracy(
    corpus: &Corpus,
    appliance: &ApplianceKind,
    method: Method,
    metric: &MetricConfig,
    estimates: &[ApplianceEstimate],
) -> Result<Option<f64>> {
    let Some(predicted) = aligned(corpus, appliance, method, estimates)? else {
        return Ok(None);
    };
    let months = metric.evaluated_months(appliance);
    let mut total = Score::default();
    for (home, p) in corpus.homes().iter().zip(predicted) {
        // Sample by sample, in the same order as the sweep, so the KNN value
        // equals the grid optimum bit for bit.
        for acc in month_accuracies(p, home.appliance(appliance)?, months.indices(), metric.zero_actual_rule) {
            total.push(acc);
        }
    }
    total.mean().map(Some).ok_or(Error::NoSamples)
}

/// Per-month cross-home means of ground truth and of each method present in
/// `estimates`.
pub fn monthly_series(
    corpus: &Corpus,
    appliance: &ApplianceKind,
    metric: &MetricConfig,
    estimates: &[ApplianceEstimate],
) -> Result<MonthlySeries> {
    let truth_profiles = corpus
        .homes()
        .iter()
        .map(|h| h.appliance(appliance))
        .collect::<Result<Vec<_>>>()?;
    let truth = mean_profile(truth_profiles.iter().copied()).ok_or(Error::NoSamples)?;
    let evaluated = metric.evaluated_months(appliance);
    let mut months: Vec<MonthPoint> = (0..12)
        .map(|m| MonthPoint {
            month: m as u8 + 1,
            evaluated: evaluated.contains(m as u8 + 1),
            truth: truth.values()[m],
            knn: None,
            national_average: None,
            fhmm: None,
            oracle: None,
        })
        .collect();
    let mut homes: Vec<HomeSeries> = corpus
        .homes()
        .iter()
        .zip(&truth_profiles)
        .map(|(h, t)| HomeSeries {
            home_id: h.home_id.clone(),
            truth: **t,
            predicted: BTreeMap::new(),
        })
        .collect();
    for method in [Method::Knn, Method::NationalAverage, Method::Fhmm, Method::Oracle] {
        let Some(predicted) = aligned(corpus, appliance, method, estimates)? else {
            continue;
        };
        let mean = mean_profile(predicted.iter().copied()).ok_or(Error::NoSamples)?;
        for (point, v) in months.iter_mut().zip(mean.values()) {
            point.set(method, *v);
        }
        for (series, p) in homes.iter_mut().zip(predicted) {
            series.predicted.insert(method, *p);
        }
    }
    Ok(MonthlySeries {
        appliance: appliance.clone(),
        months,
        homes,
    })
}
