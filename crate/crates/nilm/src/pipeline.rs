//! End-to-end leave-one-out evaluation of every selected method.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use nilm_core::baselines::{
    fhmm_monthly, national_average, select_top, train_hmm_or_fallback, FhmmModel, FractionTable, MinuteTrace,
    TrainWindow, DEFAULT_STD_FLOOR_W,
};
use nilm_core::dataset::Exclusion;
use nilm_core::evaluation::{
    monthly_series, pooled_accuracy, sensitivity_features, sensitivity_k, sweep_column, ApplianceReport,
    EvaluationReport, LoocvContext, OracleSummary, ReferenceAccuracy, SweepPlan, SweepResult, SCHEMA_VERSION,
};
use nilm_core::oracle::{oracle_search, subset_prediction, OracleResult, SearchMode, DEFAULT_EXHAUSTIVE_CAP};
use nilm_core::syndata::{generate_trace, GeneratorConfig};
use nilm_core::{
    ApplianceEstimate, ApplianceKind, Corpus, DistanceKind, HomeId, HomeRecord, Method, MonthlyProfile, Provenance,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::io::read_trace;

/// Where minute traces come from.
#[derive(Debug, Clone)]
pub enum TraceSource {
    None,
    /// One `<home_id>.csv` per home.
    Directory(PathBuf),
    /// Regenerated in memory from the generator that produced the corpus.
    Synthetic(GeneratorConfig),
}

impl TraceSource {
    pub fn is_none(&self) -> bool {
        matches!(self, TraceSource::None)
    }

    pub fn load(&self, home: &HomeRecord) -> AppResult<MinuteTrace> {
        match self {
            TraceSource::None => Err(AppError::Usage("FHMM needs minute traces; pass --traces <dir>".into())),
            TraceSource::Directory(dir) => read_trace(dir, &home.home_id),
            TraceSource::Synthetic(config) => Ok(generate_trace(config, home)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FhmmOptions {
    pub train_window: TrainWindow,
    pub top_n: usize,
    pub std_floor_w: f64,
}

impl Default for FhmmOptions {
    fn default() -> Self {
        FhmmOptions {
            train_window: TrainWindow::month(2013, 8).expect("valid month"),
            top_n: 5,
            std_floor_w: DEFAULT_STD_FLOOR_W,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Exhaustive up to the cap, greedy beyond it.
    Auto,
    Exhaustive,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOptions {
    pub mode: OracleMode,
    pub cap: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            mode: OracleMode::Auto,
            cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

impl OracleOptions {
    pub fn resolve(&self, candidates: usize) -> SearchMode {
        match self.mode {
            OracleMode::Exhaustive => SearchMode::Exhaustive,
            OracleMode::Greedy => SearchMode::Greedy,
            OracleMode::Auto if candidates <= self.cap => SearchMode::Exhaustive,
            OracleMode::Auto => {
                log::warn!(
                    "{candidates} oracle candidates exceed the exhaustive cap {}; using greedy search",
                    self.cap
                );
                SearchMode::Greedy
            }
        }
    }
}

/// Everything `run_evaluation` needs besides the corpus and traces.
#[derive(Debug, Clone)]
pub struct EvaluationPlan {
    pub appliances: Vec<ApplianceKind>,
    pub methods: Vec<Method>,
    pub k_min: usize,
    pub k_max: usize,
    pub distances: Vec<DistanceKind>,
    pub fractions: FractionTable,
    pub fhmm: FhmmOptions,
    pub oracle: OracleOptions,
    pub reference: Vec<ReferenceAccuracy>,
}

impl EvaluationPlan {
    pub fn includes(&self, method: Method) -> bool {
        self.methods.contains(&method)
    }
}

pub struct EvaluationOutput {
    pub report: EvaluationReport,
    /// Ordered by appliance, then method, then home.
    pub estimates: Vec<ApplianceEstimate>,
    pub oracle: Vec<OracleResult>,
    pub excluded: Vec<(HomeId, Exclusion)>,
}

/// Runs the configured methods over `corpus` on the current rayon pool.
pub fn run_evaluation(corpus: &Corpus, plan: &EvaluationPlan, traces: &TraceSource) -> AppResult<EvaluationOutput> {
    if plan.includes(Method::Fhmm) && traces.is_none() {
        return Err(AppError::Usage(
            "method fhmm needs minute traces; pass --traces <dir> or drop fhmm from --methods".into(),
        ));
    }
    corpus.metric.validate()?;
    let required: BTreeSet<ApplianceKind> = plan.appliances.iter().cloned().collect();
    let filtered = corpus.filter_complete(&required)?;
    for (home, why) in &filtered.excluded {
        log::warn!("excluding home {home}: {why:?}");
    }
    let corpus = &filtered.corpus;
    let metric = corpus.metric.clone();
    log::info!(
        "evaluating {} homes, {} appliances",
        corpus.len(),
        plan.appliances.len()
    );

    let sweeps = if plan.includes(Method::Knn) {
        Some(run_sweeps(corpus, plan)?)
    } else {
        None
    };

    let mut estimates: BTreeMap<(ApplianceKind, Method), Vec<ApplianceEstimate>> = BTreeMap::new();
    if let Some(sweeps) = &sweeps {
        let ctx = LoocvContext::new(corpus)?;
        for (appliance, result) in plan.appliances.iter().zip(sweeps) {
            let best = result.optimal;
            let outcome = ctx.evaluate(appliance, best.k, best.subset, best.distance, &metric)?;
            let list = outcome
                .per_home
                .into_iter()
                .map(|h| ApplianceEstimate {
                    home_id: h.home_id,
                    appliance: appliance.clone(),
                    monthly: h.predicted,
                    method: Method::Knn,
                    provenance: Provenance::Knn {
                        k: best.k,
                        subset: best.subset,
                        distance: best.distance,
                        neighbors: h.neighbors,
                    },
                })
                .collect();
            estimates.insert((appliance.clone(), Method::Knn), list);
        }
    }

    if plan.includes(Method::NationalAverage) {
        for appliance in &plan.appliances {
            let list = corpus
                .homes()
                .iter()
                .map(|h| national_average(h, &plan.fractions, appliance))
                .collect::<nilm_core::Result<Vec<_>>>()?;
            estimates.insert((appliance.clone(), Method::NationalAverage), list);
        }
    }

    let mut oracle_results = Vec::new();
    if plan.includes(Method::Oracle) {
        let (results, list) = run_oracle(corpus, plan)?;
        for (appliance, list) in plan.appliances.iter().zip(list) {
            estimates.insert((appliance.clone(), Method::Oracle), list);
        }
        oracle_results = results;
    }

    if plan.includes(Method::Fhmm) {
        let per_home = run_fhmm(corpus, plan, traces)?;
        for appliance in &plan.appliances {
            let list = per_home.iter().map(|by_kind| by_kind[appliance].clone()).collect();
            estimates.insert((appliance.clone(), Method::Fhmm), list);
        }
    }

    let mut appliance_reports = Vec::with_capacity(plan.appliances.len());
    for (i, appliance) in plan.appliances.iter().enumerate() {
        let mine: Vec<ApplianceEstimate> = estimates
            .iter()
            .filter(|((a, _), _)| a == appliance)
            .flat_map(|(_, list)| list.iter().cloned())
            .collect();
        let mut accuracy = BTreeMap::new();
        for method in &plan.methods {
            if let Some(acc) = pooled_accuracy(corpus, appliance, *method, &metric, &mine)? {
                accuracy.insert(*method, acc);
            }
        }
        let sweep = sweeps.as_ref().map(|s| s[i].clone());
        let oracle = plan.includes(Method::Oracle).then(|| {
            let per_home: Vec<OracleResult> = oracle_results
                .iter()
                .filter(|r| &r.appliance == appliance)
                .cloned()
                .collect();
            OracleSummary {
                search_mode: per_home.first().map_or(SearchMode::Exhaustive, |r| r.search_mode),
                accuracy: accuracy[&Method::Oracle],
                per_home,
            }
        });
        appliance_reports.push(ApplianceReport {
            appliance: appliance.clone(),
            homes: corpus.len(),
            sensitivity_k: sweep.as_ref().map(sensitivity_k),
            sensitivity_features: sweep.as_ref().map(sensitivity_features),
            sweep,
            accuracy,
            oracle,
            monthly: monthly_series(corpus, appliance, &metric, &mine)?,
            reference: plan
                .reference
                .iter()
                .filter(|r| &r.appliance == appliance)
                .cloned()
                .collect(),
        });
    }

    let report = EvaluationReport {
        schema_version: SCHEMA_VERSION,
        metric,
        methods: plan.methods.clone(),
        homes: corpus.homes().iter().map(|h| h.home_id.clone()).collect(),
        appliances: appliance_reports,
    };
    report.validate()?;
    let mut ordered = Vec::new();
    for appliance in &plan.appliances {
        for method in &plan.methods {
            if let Some(list) = estimates.remove(&(appliance.clone(), *method)) {
                ordered.extend(list);
            }
        }
    }
    Ok(EvaluationOutput {
        report,
        estimates: ordered,
        oracle: oracle_results,
        excluded: filtered.excluded,
    })
}

/// Full (K x subset x distance) grids, one per appliance in plan order.
pub fn run_sweeps(corpus: &Corpus, plan: &EvaluationPlan) -> AppResult<Vec<SweepResult>> {
    let ctx = LoocvContext::new(corpus)?;
    let plans = plan
        .appliances
        .iter()
        .map(|a| SweepPlan::new(a.clone(), plan.k_min..=plan.k_max, &plan.distances, corpus.len()))
        .collect::<nilm_core::Result<Vec<_>>>()?;
    let tasks: Vec<(usize, nilm_core::FeatureSubset, DistanceKind)> = plans
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.columns().into_iter().map(move |(s, d)| (i, s, d)))
        .collect();
    let metric = &corpus.metric;
    let columns = tasks
        .par_iter()
        .map(|(i, s, d)| sweep_column(&ctx, &plans[*i], *s, *d, metric))
        .collect::<nilm_core::Result<Vec<_>>>()?;
    let per_plan = columns.len() / plans.len().max(1);
    plans
        .iter()
        .zip(columns.chunks(per_plan.max(1)))
        .map(|(p, cols)| Ok(SweepResult::assemble(p, cols)?))
        .collect()
}

/// Oracle results in (appliance, home) order, and the matching estimates
/// grouped per appliance.
pub fn run_oracle(
    corpus: &Corpus,
    plan: &EvaluationPlan,
) -> AppResult<(Vec<OracleResult>, Vec<Vec<ApplianceEstimate>>)> {
    let homes = corpus.homes();
    let mode = plan.oracle.resolve(homes.len().saturating_sub(1));
    let tasks: Vec<(&ApplianceKind, usize)> = plan
        .appliances
        .iter()
        .flat_map(|a| (0..homes.len()).map(move |h| (a, h)))
        .collect();
    let pairs = tasks
        .par_iter()
        .map(|(appliance, h)| {
            let candidates: Vec<&HomeRecord> = homes
                .iter()
                .enumerate()
                .filter(|(i, _)| i != h)
                .map(|(_, c)| c)
                .collect();
            let result = oracle_search(
                &homes[*h],
                &candidates,
                appliance,
                &corpus.metric,
                mode,
                plan.oracle.cap,
            )?;
            let predicted = subset_prediction(&candidates, &result.best_subset, appliance)?;
            let estimate = result.to_estimate(predicted);
            Ok((result, estimate))
        })
        .collect::<nilm_core::Result<Vec<_>>>()?;
    let mut results = Vec::with_capacity(pairs.len());
    let mut grouped: Vec<Vec<ApplianceEstimate>> = vec![Vec::new(); plan.appliances.len()];
    for (i, (result, estimate)) in pairs.into_iter().enumerate() {
        grouped[i / homes.len().max(1)].push(estimate);
        results.push(result);
    }
    Ok((results, grouped))
}

/// Per-home FHMM estimates for the plan's appliances. Appliances outside a
/// home's top-N are predicted as zero.
pub fn run_fhmm(
    corpus: &Corpus,
    plan: &EvaluationPlan,
    traces: &TraceSource,
) -> AppResult<Vec<BTreeMap<ApplianceKind, ApplianceEstimate>>> {
    corpus
        .homes()
        .par_iter()
        .map(|home| {
            let trace = traces.load(home)?;
            fhmm_home(home, &trace, plan)
        })
        .collect()
}

/// Trains on the window, decodes the whole trace and sums months.
pub fn fhmm_home(
    home: &HomeRecord,
    trace: &MinuteTrace,
    plan: &EvaluationPlan,
) -> AppResult<BTreeMap<ApplianceKind, ApplianceEstimate>> {
    let opts = &plan.fhmm;
    let modeled = select_top(trace, opts.top_n.min(nilm_core::baselines::MAX_FHMM_APPLIANCES));
    let hmms = modeled
        .iter()
        .map(|a| train_hmm_or_fallback(trace, a, &opts.train_window, opts.std_floor_w))
        .collect::<nilm_core::Result<Vec<_>>>()?;
    let model = FhmmModel::new(hmms)?;
    let monthly = fhmm_monthly(trace, &model);
    log::debug!("fhmm {}: modelled {:?}", home.home_id, modeled);
    Ok(plan
        .appliances
        .iter()
        .map(|a| {
            let estimate = ApplianceEstimate {
                home_id: home.home_id.clone(),
                appliance: a.clone(),
                monthly: monthly.get(a).copied().unwrap_or_else(MonthlyProfile::zeros),
                method: Method::Fhmm,
                provenance: Provenance::Fhmm {
                    train_window: opts.train_window,
                    modeled: modeled.clone(),
                },
            };
            (a.clone(), estimate)
        })
        .collect())
}
