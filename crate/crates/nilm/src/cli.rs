//! Command-line definitions and value parsers.

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use nilm_core::baselines::TrainWindow;
use nilm_core::evaluation::MonthSet;
use nilm_core::{ApplianceKind, DistanceKind, FeatureSubset, Method, ZeroActualRule};

use crate::pipeline::OracleMode;

#[derive(Debug, Parser)]
#[command(
    name = "nilm",
    version,
    about = "Monthly appliance energy disaggregation by neighbourhood matching"
)]
pub struct Cli {
    /// Log level (error, warn, info, debug, trace); RUST_LOG overrides.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic corpus (and optionally minute traces).
    Generate(GenerateArgs),
    /// Leave-one-out evaluation of every selected method.
    Evaluate(Box<EvaluateArgs>),
    /// Predict appliance energies of homes that only have monthly bills.
    Predict(PredictArgs),
    /// Oracle subset search only.
    Oracle(OracleArgs),
    /// FHMM baseline only.
    Fhmm(FhmmArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// homes.csv: home_id,area_sqft,occupants,rooms
    #[arg(long)]
    pub homes: Option<PathBuf>,
    /// aggregate.csv: home_id,month,energy_kwh
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
    /// appliances.csv: home_id,appliance,month,energy_kwh
    #[arg(long)]
    pub appliances: Option<PathBuf>,
    /// Reject unknown appliance names and incomplete appliance series.
    #[arg(long)]
    pub strict: bool,
    /// Tolerated excess of the submetered sum over the aggregate (fraction).
    #[arg(long)]
    pub slack: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct MetricArgs {
    /// Months scored for HVAC, e.g. `5-10` or `6,7,8`.
    #[arg(long, value_parser = parse_months)]
    pub hvac_months: Option<MonthSet>,
    /// Handling of months whose actual energy is zero.
    #[arg(long, value_enum)]
    pub zero_actual: Option<ZeroActualArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZeroActualArg {
    /// 100 when the prediction is also zero, else 0.
    BothZero100,
    /// Drop the sample.
    Skip,
}

impl From<ZeroActualArg> for ZeroActualRule {
    fn from(v: ZeroActualArg) -> Self {
        match v {
            ZeroActualArg::BothZero100 => ZeroActualRule::BothZero100,
            ZeroActualArg::Skip => ZeroActualRule::Skip,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Output directory for homes.csv, aggregate.csv, appliances.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator config (TOML); flags override its values.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_homes: Option<usize>,
    /// Also write one minute-trace CSV per home into this directory.
    #[arg(long)]
    pub traces: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FhmmFlags {
    /// Training range: `YYYY-MM` or `YYYY-MM-DD..YYYY-MM-DD` (end exclusive).
    #[arg(long, value_parser = parse_train_window)]
    pub train_window: Option<TrainWindow>,
    /// Appliances modelled per home (at most 5).
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Emission standard deviation floor, W.
    #[arg(long)]
    pub std_floor: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleFlags {
    #[arg(long, value_enum)]
    pub oracle_mode: Option<OracleMode>,
    /// Largest candidate count searched exhaustively (at most 30).
    #[arg(long)]
    pub oracle_cap: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Evaluate a synthetic corpus from this generator config instead of CSV files.
    #[arg(long, conflicts_with_all = ["homes", "aggregate", "appliances"])]
    pub generator: Option<PathBuf>,
    /// Seed of the synthetic corpus (used when no corpus files are given).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Size of the synthetic corpus.
    #[arg(long)]
    pub n_homes: Option<usize>,
    /// Directory of per-home minute traces (`<home_id>.csv`).
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated: knn, national_average, fhmm, oracle, or `all`.
    #[arg(long, value_parser = parse_methods)]
    pub methods: Option<MethodList>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Comma-separated: euclidean, manhattan.
    #[arg(long, value_parser = parse_distances)]
    pub distances: Option<DistanceList>,
    #[command(flatten)]
    pub metric: MetricArgs,
    /// Fraction table (TOML, percent per appliance).
    #[arg(long)]
    pub fractions: Option<PathBuf>,
    #[command(flatten)]
    pub fhmm: FhmmFlags,
    #[command(flatten)]
    pub oracle: OracleFlags,
    /// Literature accuracies: appliance,source_label,accuracy_percent
    #[arg(long)]
    pub reference_accuracies: Option<PathBuf>,
    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Resolved configuration written by an earlier run; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// homes.csv of the homes to predict.
    #[arg(long)]
    pub target_homes: PathBuf,
    /// aggregate.csv of the homes to predict.
    #[arg(long)]
    pub target_aggregate: PathBuf,
    /// report.json of an earlier evaluation; supplies each appliance's
    /// optimal K, subset and distance.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Feature units joined by `+`, e.g. `raw_monthly+area`.
    #[arg(long)]
    pub subset: Option<FeatureSubset>,
    #[arg(long)]
    pub distance: Option<DistanceKind>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub oracle: OracleFlags,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FhmmArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long)]
    pub traces: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub metric: MetricArgs,
    #[command(flatten)]
    pub fhmm: FhmmFlags,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodList(pub Vec<Method>);

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceList(pub Vec<DistanceKind>);

fn split(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

pub fn parse_methods(s: &str) -> Result<MethodList, String> {
    let mut out = Vec::new();
    for token in split(s) {
        match token.to_ascii_lowercase().as_str() {
            "all" => out.extend([Method::Knn, Method::NationalAverage, Method::Fhmm, Method::Oracle]),
            "knn" => out.push(Method::Knn),
            "national_average" | "national" => out.push(Method::NationalAverage),
            "fhmm" => out.push(Method::Fhmm),
            "oracle" => out.push(Method::Oracle),
            other => return Err(format!("unknown method {other:?}")),
        }
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err("no methods given".into());
    }
    Ok(MethodList(out))
}

pub fn parse_distances(s: &str) -> Result<DistanceList, String> {
    let mut out = split(s)
        .map(|t| t.parse::<DistanceKind>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err("no distances given".into());
    }
    Ok(DistanceList(out))
}

/// `5-10`, `6,7,8` or a mix such as `1-2,12`.
pub fn parse_months(s: &str) -> Result<MonthSet, String> {
    let mut months = Vec::new();
    for token in split(s) {
        let num = |t: &str| t.trim().parse::<u8>().map_err(|_| format!("bad month {t:?}"));
        match token.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty month range {token}"));
                }
                months.extend(a..=b);
            }
            None => months.push(num(token)?),
        }
    }
    let set = MonthSet::from_months(months).map_err(|e| e.to_string())?;
    if set.is_empty() {
        return Err("month set is empty".into());
    }
    Ok(set)
}

/// `YYYY-MM` for a calendar month, or `START..END` dates with END exclusive.
pub fn parse_train_window(s: &str) -> Result<TrainWindow, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let date = |t: &str| NaiveDate::parse_from_str(t.trim(), "%Y-%m-%d").map_err(|_| format!("bad date {t:?}"));
        let (start, end) = (date(a)?, date(b)?);
        if end <= start {
            return Err(format!("empty training window {s}"));
        }
        return Ok(TrainWindow {
            start: start.and_hms_opt(0, 0, 0).expect("midnight"),
            end: end.and_hms_opt(0, 0, 0).expect("midnight"),
        });
    }
    let (y, m) = s.split_once('-').ok_or_else(|| format!("bad training window {s:?}"))?;
    let year = y.parse::<i32>().map_err(|_| format!("bad year {y:?}"))?;
    let month = m.parse::<u32>().map_err(|_| format!("bad month {m:?}"))?;
    TrainWindow::month(year, month).map_err(|e| e.to_string())
}

/// Appliances evaluated by default.
pub fn default_appliances() -> Vec<ApplianceKind> {
    ApplianceKind::EVALUATED.to_vec()
}
