//! Report and plot-ready tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use nilm_core::evaluation::{EvaluationReport, MonthlySeries};
use nilm_core::neighbors::Method;
use nilm_core::oracle::OracleResult;
use nilm_core::{ApplianceEstimate, Corpus, HomeId};
use serde::Serialize;

use crate::error::{AppError, AppResult};
use crate::io::corpus::create;

pub const REPORT_FILE: &str = "report.json";
pub const GRID_FILE: &str = "grid.csv";
pub const OPTIMAL_FILE: &str = "optimal.csv";
pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const SENSITIVITY_K_FILE: &str = "sensitivity_k.csv";
pub const SENSITIVITY_FEATURES_FILE: &str = "sensitivity_features.csv";
pub const MONTHLY_SERIES_FILE: &str = "monthly_series.csv";
pub const ORACLE_FILE: &str = "oracle.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

/// Writes `body` line by line to `path`.
pub fn write_lines(path: &Path, header: &str, lines: impl IntoIterator<Item = String>) -> AppResult<()> {
    let err = |e| AppError::write(path, e);
    let mut w = create(path)?;
    writeln!(w, "{header}").map_err(err)?;
    for line in lines {
        writeln!(w, "{line}").map_err(err)?;
    }
    w.flush().map_err(err)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::Internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| AppError::write(path, e))
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    create(path)?;
    std::fs::write(path, text).map_err(|e| AppError::write(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn grid_lines(report: &EvaluationReport) -> Vec<String> {
    let mut out = Vec::new();
    for a in &report.appliances {
        if let Some(sweep) = &a.sweep {
            for c in &sweep.grid {
                out.push(format!(
                    "{},{},{},{},{}",
                    a.appliance, c.k, c.subset, c.distance, c.accuracy
                ));
            }
        }
    }
    out
}

pub fn monthly_lines(series: &MonthlySeries) -> Vec<String> {
    let mut out = Vec::new();
    for p in &series.months {
        let mut row = |series_name: &str, value: Option<f64>| {
            if let Some(v) = value {
                out.push(format!(
                    "{},mean,{},{},{},{}",
                    series.appliance, p.month, p.evaluated, series_name, v
                ));
            }
        };
        row("truth", Some(p.truth));
        for m in [Method::Knn, Method::NationalAverage, Method::Fhmm, Method::Oracle] {
            row(m.name(), p.method(m));
        }
    }
    for h in &series.homes {
        for (i, v) in h.truth.values().iter().enumerate() {
            let evaluated = series.months[i].evaluated;
            out.push(format!(
                "{},{},{},{},truth,{}",
                series.appliance,
                h.home_id,
                i + 1,
                evaluated,
                v
            ));
            for (m, p) in &h.predicted {
                out.push(format!(
                    "{},{},{},{},{},{}",
                    series.appliance,
                    h.home_id,
                    i + 1,
                    evaluated,
                    m,
                    p.values()[i]
                ));
            }
        }
    }
    out
}

pub fn oracle_lines(results: &[OracleResult]) -> Vec<String> {
    results
        .iter()
        .map(|r| {
            let ids: Vec<&str> = r.best_subset.iter().map(HomeId::as_str).collect();
            format!(
                "{},{},{},{},{}",
                r.test_home_id,
                r.appliance,
                ids.join(";"),
                r.best_accuracy,
                r.search_mode
            )
        })
        .collect()
}

/// One row per (home, appliance, method, month), with ground truth when the
/// corpus has it.
pub fn prediction_lines(estimates: &[ApplianceEstimate], truth: Option<&Corpus>) -> Vec<String> {
    let mut out = Vec::new();
    for e in estimates {
        let actual = truth
            .and_then(|c| c.get(&e.home_id))
            .and_then(|h| h.appliance(&e.appliance).ok());
        for (m, v) in e.monthly.values().iter().enumerate() {
            out.push(format!(
                "{},{},{},{},{},{}",
                e.home_id,
                e.appliance,
                e.method,
                m + 1,
                v,
                opt(actual.map(|a| a.values()[m]))
            ));
        }
    }
    out
}

/// Writes report.json and the derived tables into `dir`; returns the paths
/// written.
pub fn write_evaluation(
    dir: &Path,
    report: &EvaluationReport,
    estimates: &[ApplianceEstimate],
    oracle: &[OracleResult],
    corpus: &Corpus,
) -> AppResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::write(dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, header: &str, lines: Vec<String>| -> AppResult<()> {
        let path = dir.join(name);
        write_lines(&path, header, lines)?;
        written.push(path);
        Ok(())
    };

    let has_sweep = report.appliances.iter().any(|a| a.sweep.is_some());
    if has_sweep {
        emit(GRID_FILE, "appliance,k,subset,distance,accuracy", grid_lines(report))?;
        let mut optimal = Vec::new();
        let mut by_k = Vec::new();
        let mut by_subset = Vec::new();
        for a in &report.appliances {
            let Some(s) = &a.sweep else { continue };
            let o = s.optimal;
            optimal.push(format!(
                "{},{},{},{},{}",
                a.appliance, o.k, o.subset, o.distance, o.accuracy
            ));
            for p in a.sensitivity_k.iter().flatten() {
                by_k.push(format!(
                    "{},{},{},{},{}",
                    a.appliance, o.subset, o.distance, p.k, p.accuracy
                ));
            }
            for p in a.sensitivity_features.iter().flatten() {
                by_subset.push(format!(
                    "{},{},{},{},{}",
                    a.appliance, o.k, o.distance, p.subset, p.accuracy
                ));
            }
        }
        emit(OPTIMAL_FILE, "appliance,k,subset,distance,accuracy", optimal)?;
        emit(SENSITIVITY_K_FILE, "appliance,subset,distance,k,accuracy", by_k)?;
        emit(
            SENSITIVITY_FEATURES_FILE,
            "appliance,k,distance,subset,accuracy",
            by_subset,
        )?;
    }

    let mut accuracy = Vec::new();
    for a in &report.appliances {
        for (m, acc) in &a.accuracy {
            accuracy.push(format!("{},{},{}", a.appliance, m, acc));
        }
        for r in &a.reference {
            accuracy.push(format!(
                "{},reference:{},{}",
                a.appliance, r.source_label, r.accuracy_percent
            ));
        }
    }
    emit(ACCURACY_FILE, "appliance,method,accuracy", accuracy)?;

    let monthly: Vec<String> = report
        .appliances
        .iter()
        .flat_map(|a| monthly_lines(&a.monthly))
        .collect();
    emit(
        MONTHLY_SERIES_FILE,
        "appliance,scope,month,evaluated,series,energy_kwh",
        monthly,
    )?;

    if !oracle.is_empty() {
        emit(
            ORACLE_FILE,
            "test_home_id,appliance,subset,accuracy,mode",
            oracle_lines(oracle),
        )?;
    }
    emit(
        PREDICTIONS_FILE,
        "home_id,appliance,method,month,predicted_kwh,actual_kwh",
        prediction_lines(estimates, Some(corpus)),
    )?;

    let path = dir.join(REPORT_FILE);
    write_json(&path, report)?;
    written.push(path);
    Ok(written)
}
