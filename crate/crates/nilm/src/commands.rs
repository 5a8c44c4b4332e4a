//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nilm_core::baselines::FractionTable;
use nilm_core::evaluation::{pooled_accuracy, EvaluationReport, MetricConfig, ReferenceAccuracy};
use nilm_core::features::{build_normalization, extract};
use nilm_core::neighbors::{find_neighborhood, predict_appliance};
use nilm_core::syndata::{generate_corpus, generate_trace, GeneratorConfig};
use nilm_core::{ApplianceKind, Corpus, DistanceKind, FeatureSubset, FeatureVector, HomeId, LoadOptions, Method};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cli::{
    default_appliances, CorpusArgs, EvaluateArgs, FhmmArgs, FhmmFlags, GenerateArgs, MetricArgs, OracleArgs,
    OracleFlags, PredictArgs,
};
use crate::error::{AppError, AppResult};
use crate::io::outputs::{
    oracle_lines, prediction_lines, write_evaluation, write_json, write_lines, write_text, ORACLE_FILE,
    PREDICTIONS_FILE,
};
use crate::io::{
    format_fractions, load_corpus, load_unmetered, read_fractions, read_reference_accuracies, write_corpus,
    write_trace, CorpusPaths,
};
use crate::parallel;
use crate::pipeline::{run_evaluation, run_fhmm, run_oracle, EvaluationPlan, FhmmOptions, OracleOptions, TraceSource};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";
pub const GENERATOR_CONFIG_FILE: &str = "generator.toml";
pub const FRACTIONS_FILE: &str = "fractions.toml";
const DEFAULT_K_MAX: usize = 10;

/// Fully resolved `evaluate` configuration, echoed next to the outputs.
/// Passing it back with `--config` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// CSV corpus; absent when evaluating a synthetic corpus.
    pub corpus: Option<CorpusPaths>,
    /// Generator of the synthetic corpus (and its traces).
    pub generator: Option<GeneratorConfig>,
    pub strict: bool,
    pub slack: f64,
    pub traces: Option<PathBuf>,
    pub out: PathBuf,
    pub methods: Vec<Method>,
    pub appliances: Vec<ApplianceKind>,
    pub k_min: usize,
    pub k_max: usize,
    pub distances: Vec<DistanceKind>,
    pub metric: MetricConfig,
    /// Fractions of the aggregate (0..1) per appliance.
    pub fraction_table: FractionTable,
    pub fhmm: FhmmOptions,
    pub oracle: OracleOptions,
    pub reference_accuracies: Option<PathBuf>,
    pub jobs: usize,
}

fn read_text(path: &Path) -> AppResult<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::read(path, e))
}

pub fn read_generator_config(path: &Path) -> AppResult<GeneratorConfig> {
    toml::from_str(&read_text(path)?).map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))
}

fn generator_toml(config: &GeneratorConfig) -> AppResult<String> {
    toml::to_string(config).map_err(|e| AppError::Usage(format!("generator config: {e}")))
}

fn corpus_paths(args: &CorpusArgs) -> AppResult<Option<CorpusPaths>> {
    match (&args.homes, &args.aggregate, &args.appliances) {
        (None, None, None) => Ok(None),
        (Some(h), Some(a), Some(p)) => Ok(Some(CorpusPaths {
            homes: h.clone(),
            aggregate: a.clone(),
            appliances: p.clone(),
        })),
        _ => Err(AppError::Usage(
            "--homes, --aggregate and --appliances must be given together".into(),
        )),
    }
}

fn require_corpus(args: &CorpusArgs) -> AppResult<CorpusPaths> {
    corpus_paths(args)?.ok_or_else(|| AppError::Usage("--homes, --aggregate and --appliances are required".into()))
}

fn load_options(args: &CorpusArgs) -> LoadOptions {
    let default = LoadOptions::default();
    LoadOptions {
        strict: args.strict,
        slack: args.slack.unwrap_or(default.slack),
    }
}

fn apply_metric(base: MetricConfig, args: &MetricArgs) -> AppResult<MetricConfig> {
    let mut metric = base;
    if let Some(m) = args.hvac_months {
        metric.hvac_months = m;
    }
    if let Some(z) = args.zero_actual {
        metric.zero_actual_rule = z.into();
    }
    metric.validate()?;
    Ok(metric)
}

fn apply_fhmm(base: FhmmOptions, flags: &FhmmFlags) -> AppResult<FhmmOptions> {
    let mut o = base;
    if let Some(w) = flags.train_window {
        o.train_window = w;
    }
    if let Some(n) = flags.top_n {
        o.top_n = n;
    }
    if let Some(f) = flags.std_floor {
        o.std_floor_w = f;
    }
    if o.top_n == 0 || o.top_n > nilm_core::baselines::MAX_FHMM_APPLIANCES {
        return Err(AppError::Usage(format!("--top-n must be 1..=5, got {}", o.top_n)));
    }
    if o.std_floor_w.is_nan() || o.std_floor_w <= 0.0 {
        return Err(AppError::Usage(format!(
            "--std-floor must be positive, got {}",
            o.std_floor_w
        )));
    }
    Ok(o)
}

fn apply_oracle(base: OracleOptions, flags: &OracleFlags) -> AppResult<OracleOptions> {
    let mut o = base;
    if let Some(m) = flags.oracle_mode {
        o.mode = m;
    }
    if let Some(c) = flags.oracle_cap {
        o.cap = c;
    }
    if o.cap == 0 || o.cap > nilm_core::oracle::MAX_EXHAUSTIVE_CAP {
        return Err(AppError::Usage(format!(
            "--oracle-cap must be 1..={}, got {}",
            nilm_core::oracle::MAX_EXHAUSTIVE_CAP,
            o.cap
        )));
    }
    Ok(o)
}

pub fn generate(args: &GenerateArgs) -> AppResult<()> {
    let mut config = match &args.generator {
        Some(path) => read_generator_config(path)?,
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.n_homes {
        config.n_homes = n;
    }
    let corpus = generate_corpus(&config)?;
    write_corpus(&CorpusPaths::in_dir(&args.out), &corpus)?;
    write_text(&args.out.join(GENERATOR_CONFIG_FILE), &generator_toml(&config)?)?;
    if let Some(dir) = &args.traces {
        std::fs::create_dir_all(dir).map_err(|e| AppError::write(dir, e))?;
        parallel::install(args.jobs, || {
            corpus.homes().par_iter().try_for_each(|home| -> AppResult<()> {
                let trace = generate_trace(&config, home)?;
                write_trace(dir, &trace)?;
                Ok(())
            })
        })??;
    }
    let ids: Vec<&str> = corpus.homes().iter().map(|h| h.home_id.as_str()).collect();
    println!("generated {} homes: {}", corpus.len(), ids.join(" "));
    println!("corpus written to {}", args.out.display());
    if let Some(dir) = &args.traces {
        println!("traces written to {}", dir.display());
    }
    Ok(())
}

/// Merges a config echo (if any) with explicit flags.
pub fn resolve_run_config(args: &EvaluateArgs) -> AppResult<RunConfig> {
    let base: Option<RunConfig> = match &args.config {
        Some(path) => Some(
            serde_json::from_str(&read_text(path)?).map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let paths = corpus_paths(&args.corpus)?;
    let mut generator = base.as_ref().and_then(|b| b.generator.clone());
    let mut corpus = base.as_ref().and_then(|b| b.corpus.clone());
    if let Some(p) = paths {
        corpus = Some(p);
        generator = None;
    }
    if let Some(path) = &args.generator {
        generator = Some(read_generator_config(path)?);
        corpus = None;
    }
    if corpus.is_none() {
        let g = generator.get_or_insert_with(GeneratorConfig::default);
        if let Some(seed) = args.seed {
            g.seed = seed;
        }
        if let Some(n) = args.n_homes {
            g.n_homes = n;
        }
    } else if args.seed.is_some() || args.n_homes.is_some() {
        return Err(AppError::Usage(
            "--seed and --n-homes apply only to synthetic corpora".into(),
        ));
    }

    let traces = args
        .traces
        .clone()
        .or_else(|| base.as_ref().and_then(|b| b.traces.clone()));
    let has_traces = traces.is_some() || generator.is_some();
    let methods = match (&args.methods, &base) {
        (Some(m), _) => m.0.clone(),
        (None, Some(b)) => b.methods.clone(),
        (None, None) if has_traces => vec![Method::Knn, Method::NationalAverage, Method::Fhmm, Method::Oracle],
        (None, None) => vec![Method::Knn, Method::NationalAverage, Method::Oracle],
    };
    let fraction_table = match (&args.fractions, &base) {
        (Some(path), _) => read_fractions(path)?,
        (None, Some(b)) => b.fraction_table.clone(),
        (None, None) => FractionTable::default(),
    };
    let metric = apply_metric(
        base.as_ref().map(|b| b.metric.clone()).unwrap_or_default(),
        &args.metric,
    )?;
    let defaults = LoadOptions::default();
    Ok(RunConfig {
        strict: args.corpus.strict || base.as_ref().is_some_and(|b| b.strict),
        slack: args
            .corpus
            .slack
            .or(base.as_ref().map(|b| b.slack))
            .unwrap_or(defaults.slack),
        corpus,
        generator,
        traces,
        out: args
            .out
            .clone()
            .or_else(|| base.as_ref().map(|b| b.out.clone()))
            .ok_or_else(|| AppError::Usage("--out is required".into()))?,
        methods,
        appliances: base.as_ref().map_or_else(default_appliances, |b| b.appliances.clone()),
        k_min: args.k_min.or(base.as_ref().map(|b| b.k_min)).unwrap_or(1),
        // 0 until the corpus size is known.
        k_max: args.k_max.or(base.as_ref().map(|b| b.k_max)).unwrap_or(0),
        distances: args
            .distances
            .as_ref()
            .map(|d| d.0.clone())
            .or(base.as_ref().map(|b| b.distances.clone()))
            .unwrap_or_else(|| DistanceKind::ALL.to_vec()),
        metric,
        fraction_table,
        fhmm: apply_fhmm(base.as_ref().map(|b| b.fhmm.clone()).unwrap_or_default(), &args.fhmm)?,
        oracle: apply_oracle(base.as_ref().map(|b| b.oracle).unwrap_or_default(), &args.oracle)?,
        reference_accuracies: args
            .reference_accuracies
            .clone()
            .or_else(|| base.as_ref().and_then(|b| b.reference_accuracies.clone())),
        jobs: args.jobs.or(base.as_ref().map(|b| b.jobs)).unwrap_or(0),
    })
}

/// Loads the corpus a run config points at.
pub fn load_run_corpus(config: &RunConfig) -> AppResult<(Corpus, TraceSource)> {
    let options = LoadOptions {
        strict: config.strict,
        slack: config.slack,
    };
    match (&config.corpus, &config.generator) {
        (Some(paths), _) => {
            let (corpus, _) = load_corpus(paths, options, config.metric.clone())?;
            let traces = config.traces.clone().map_or(TraceSource::None, TraceSource::Directory);
            Ok((corpus, traces))
        }
        (None, Some(g)) => {
            let mut corpus = generate_corpus(g)?;
            corpus.metric = config.metric.clone();
            corpus.slack = config.slack;
            let traces = match &config.traces {
                Some(dir) => TraceSource::Directory(dir.clone()),
                None => TraceSource::Synthetic(g.clone()),
            };
            Ok((corpus, traces))
        }
        (None, None) => Err(AppError::Usage("no corpus given".into())),
    }
}

pub struct EvaluateSummary {
    pub report: EvaluationReport,
    pub config: RunConfig,
    pub written: Vec<PathBuf>,
}

pub fn evaluate(args: &EvaluateArgs) -> AppResult<EvaluateSummary> {
    let mut config = resolve_run_config(args)?;
    let (corpus, traces) = load_run_corpus(&config)?;
    if config.k_max == 0 {
        config.k_max = DEFAULT_K_MAX.min(corpus.len().saturating_sub(1)).max(1);
    }
    let reference: Vec<ReferenceAccuracy> = match &config.reference_accuracies {
        Some(path) => read_reference_accuracies(path)?,
        None => Vec::new(),
    };
    let plan = EvaluationPlan {
        appliances: config.appliances.clone(),
        methods: config.methods.clone(),
        k_min: config.k_min,
        k_max: config.k_max,
        distances: config.distances.clone(),
        fractions: config.fraction_table.clone(),
        fhmm: config.fhmm.clone(),
        oracle: config.oracle,
        reference,
    };
    let output = parallel::install(config.jobs, || run_evaluation(&corpus, &plan, &traces))??;
    let mut written = write_evaluation(&config.out, &output.report, &output.estimates, &output.oracle, &corpus)?;
    let echo = config.out.join(RESOLVED_CONFIG_FILE);
    write_json(&echo, &config)?;
    written.push(echo);
    let fractions = config.out.join(FRACTIONS_FILE);
    write_text(&fractions, &format_fractions(&config.fraction_table))?;
    written.push(fractions);
    Ok(EvaluateSummary {
        report: output.report,
        config,
        written,
    })
}

/// Table of optimal configurations and per-method accuracy.
pub fn summary_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>3}  {:<44} {:<9}",
        "appliance", "K", "features", "distance"
    ));
    for m in &report.methods {
        out.push_str(&format!(" {:>16}", m.name()));
    }
    out.push('\n');
    for a in &report.appliances {
        let (k, subset, distance) = match &a.sweep {
            Some(s) => (
                s.optimal.k.to_string(),
                s.optimal.subset.to_string(),
                s.optimal.distance.to_string(),
            ),
            None => ("-".into(), "-".into(), "-".into()),
        };
        out.push_str(&format!(
            "{:<16} {:>3}  {:<44} {:<9}",
            a.appliance.name(),
            k,
            subset,
            distance
        ));
        for m in &report.methods {
            match a.accuracy.get(m) {
                Some(v) => out.push_str(&format!(" {v:>16.2}")),
                None => out.push_str(&format!(" {:>16}", "-")),
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct PredictConfig {
    k: usize,
    subset: FeatureSubset,
    distance: DistanceKind,
}

pub fn predict(args: &PredictArgs) -> AppResult<usize> {
    let paths = require_corpus(&args.corpus)?;
    let (reference, _) = load_corpus(&paths, load_options(&args.corpus), MetricConfig::default())?;
    let targets = load_unmetered(&args.target_homes, &args.target_aggregate, MetricConfig::default())?;
    let sweep: Option<EvaluationReport> = match &args.sweep {
        Some(path) => Some(
            serde_json::from_str(&read_text(path)?).map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let mut configs = BTreeMap::new();
    for appliance in default_appliances() {
        let optimal = sweep
            .as_ref()
            .and_then(|r| r.appliance(&appliance))
            .and_then(|a| a.sweep.as_ref())
            .map(|s| s.optimal);
        let k = args.k.or(optimal.map(|o| o.k));
        let subset = args.subset.or(optimal.map(|o| o.subset));
        let distance = args
            .distance
            .or(optimal.map(|o| o.distance))
            .unwrap_or(DistanceKind::Euclidean);
        let (Some(k), Some(subset)) = (k, subset) else {
            return Err(AppError::Usage(format!(
                "no configuration for {appliance}: pass --sweep <report.json> or --k and --subset"
            )));
        };
        configs.insert(appliance, PredictConfig { k, subset, distance });
    }

    let mut lines = Vec::new();
    for target in targets.homes() {
        if reference.get(&target.home_id).is_some() {
            return Err(nilm_core::Error::TestHomeInReference(target.home_id.clone()).into());
        }
        for (appliance, cfg) in &configs {
            let candidates = reference
                .filter_complete(&[appliance.clone()].into_iter().collect())?
                .corpus;
            let spec = build_normalization(&candidates, cfg.subset)?;
            let test = spec.apply(&extract(target, cfg.subset)?)?;
            let refs = candidates
                .homes()
                .iter()
                .map(|h| Ok((h.home_id.clone(), spec.apply(&extract(h, cfg.subset)?)?)))
                .collect::<nilm_core::Result<Vec<(HomeId, FeatureVector)>>>()?;
            let hood = find_neighborhood(&target.home_id, &test, &refs, cfg.k, cfg.distance)?;
            let estimate = predict_appliance(&hood, &candidates, appliance, cfg.subset, cfg.distance)?;
            let neighbors: Vec<&str> = hood.neighbor_ids.iter().map(HomeId::as_str).collect();
            for (m, v) in estimate.monthly.values().iter().enumerate() {
                lines.push(format!(
                    "{},{},{},{},{},{},{},{}",
                    target.home_id,
                    appliance,
                    m + 1,
                    v,
                    cfg.k,
                    cfg.subset,
                    cfg.distance,
                    neighbors.join(";")
                ));
            }
        }
    }
    let rows = lines.len();
    write_lines(
        &args.out,
        "home_id,appliance,month,energy_kwh,k,subset,distance,neighbors",
        lines,
    )?;
    Ok(rows)
}

fn plan_for(metric_appliances: Vec<ApplianceKind>, methods: Vec<Method>) -> EvaluationPlan {
    EvaluationPlan {
        appliances: metric_appliances,
        methods,
        k_min: 1,
        k_max: 1,
        distances: DistanceKind::ALL.to_vec(),
        fractions: FractionTable::default(),
        fhmm: FhmmOptions::default(),
        oracle: OracleOptions::default(),
        reference: Vec::new(),
    }
}

pub fn oracle(args: &OracleArgs) -> AppResult<Vec<(ApplianceKind, f64)>> {
    let paths = require_corpus(&args.corpus)?;
    let metric = apply_metric(MetricConfig::default(), &args.metric)?;
    let (corpus, _) = load_corpus(&paths, load_options(&args.corpus), metric.clone())?;
    let appliances = default_appliances();
    let corpus = corpus.filter_complete(&appliances.iter().cloned().collect())?.corpus;
    let mut plan = plan_for(appliances.clone(), vec![Method::Oracle]);
    plan.oracle = apply_oracle(OracleOptions::default(), &args.oracle)?;
    let (results, estimates) = parallel::install(args.jobs, || run_oracle(&corpus, &plan))??;
    std::fs::create_dir_all(&args.out).map_err(|e| AppError::write(&args.out, e))?;
    write_lines(
        &args.out.join(ORACLE_FILE),
        "test_home_id,appliance,subset,accuracy,mode",
        oracle_lines(&results),
    )?;
    let flat: Vec<_> = estimates.into_iter().flatten().collect();
    write_lines(
        &args.out.join(PREDICTIONS_FILE),
        "home_id,appliance,method,month,predicted_kwh,actual_kwh",
        prediction_lines(&flat, Some(&corpus)),
    )?;
    appliances
        .into_iter()
        .map(|a| {
            let acc = pooled_accuracy(&corpus, &a, Method::Oracle, &metric, &flat)?.unwrap_or(0.0);
            Ok((a, acc))
        })
        .collect()
}

pub fn fhmm(args: &FhmmArgs) -> AppResult<Vec<(ApplianceKind, f64)>> {
    let paths = require_corpus(&args.corpus)?;
    let metric = apply_metric(MetricConfig::default(), &args.metric)?;
    let (corpus, _) = load_corpus(&paths, load_options(&args.corpus), metric.clone())?;
    let appliances = default_appliances();
    let corpus = corpus.filter_complete(&appliances.iter().cloned().collect())?.corpus;
    let mut plan = plan_for(appliances.clone(), vec![Method::Fhmm]);
    plan.fhmm = apply_fhmm(FhmmOptions::default(), &args.fhmm)?;
    let traces = TraceSource::Directory(args.traces.clone());
    let per_home = parallel::install(args.jobs, || run_fhmm(&corpus, &plan, &traces))??;
    let mut flat = Vec::new();
    for a in &appliances {
        flat.extend(per_home.iter().map(|m| m[a].clone()));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| AppError::write(&args.out, e))?;
    write_lines(
        &args.out.join(PREDICTIONS_FILE),
        "home_id,appliance,method,month,predicted_kwh,actual_kwh",
        prediction_lines(&flat, Some(&corpus)),
    )?;
    appliances
        .into_iter()
        .map(|a| {
            let acc = pooled_accuracy(&corpus, &a, Method::Fhmm, &metric, &flat)?.unwrap_or(0.0);
            Ok((a, acc))
        })
        .collect()
}
