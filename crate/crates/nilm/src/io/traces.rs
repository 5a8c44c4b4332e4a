//! Minute traces: one CSV per home named `<home_id>.csv`, header
//! `timestamp,aggregate_w,<appliance columns>`, UTC timestamps formatted
//! `YYYY-MM-DDTHH:MMZ` on a gapless one-minute grid.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::format::{Item, StrftimeItems};
use chrono::{Duration, NaiveDateTime};
use nilm_core::baselines::MinuteTrace;
use nilm_core::{ApplianceKind, HomeId};

use crate::error::{AppError, AppResult};
use crate::io::corpus::create;

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%MZ";

pub fn trace_path(dir: &Path, home: &HomeId) -> PathBuf {
    dir.join(format!("{home}.csv"))
}

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).ok()
}

/// Reads the trace of `home` from `dir`.
pub fn read_trace(dir: &Path, home: &HomeId) -> AppResult<MinuteTrace> {
    read_trace_file(&trace_path(dir, home), home.clone())
}

pub fn read_trace_file(path: &Path, home: HomeId) -> AppResult<MinuteTrace> {
    let file = std::fs::File::open(path).map_err(|e| AppError::read(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(std::io::BufReader::with_capacity(1 << 20, file));
    let headers = rdr.headers().map_err(|e| AppError::csv(path, e))?.clone();
    if headers.get(0) != Some("timestamp") || headers.get(1) != Some("aggregate_w") {
        return Err(AppError::parse(path, 1, "header must start with timestamp,aggregate_w"));
    }
    let kinds: Vec<ApplianceKind> = headers
        .iter()
        .skip(2)
        .map(|name| ApplianceKind::parse(name, false))
        .collect::<nilm_core::Result<_>>()?;
    let mut aggregate = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); kinds.len()];
    let mut start = None;
    let mut record = csv::StringRecord::new();
    let mut line = 1;
    while rdr.read_record(&mut record).map_err(|e| AppError::csv(path, e))? {
        line += 1;
        let ts = parse_timestamp(&record[0])
            .ok_or_else(|| AppError::parse(path, line, format!("bad timestamp {:?}", &record[0])))?;
        let start = *start.get_or_insert(ts);
        let expected = start + Duration::minutes(aggregate.len() as i64);
        if ts != expected {
            return Err(AppError::parse(
                path,
                line,
                format!(
                    "expected minute {}, found {}",
                    expected.format(TIMESTAMP_FORMAT),
                    &record[0]
                ),
            ));
        }
        if record.len() != kinds.len() + 2 {
            return Err(AppError::parse(path, line, "wrong number of columns"));
        }
        let value = |i: usize| -> AppResult<f64> {
            record[i]
                .parse::<f64>()
                .map_err(|_| AppError::parse(path, line, format!("bad number {:?}", &record[i])))
        };
        aggregate.push(value(1)?);
        for (c, column) in columns.iter_mut().enumerate() {
            column.push(value(c + 2)?);
        }
    }
    let start = start.ok_or_else(|| AppError::parse(path, 1, "trace has no rows"))?;
    let submetered: BTreeMap<ApplianceKind, Vec<f64>> = kinds.into_iter().zip(columns).collect();
    MinuteTrace::new(home, start, aggregate, submetered).map_err(|source| AppError::InFile {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_trace(dir: &Path, trace: &MinuteTrace) -> AppResult<PathBuf> {
    let path = trace_path(dir, &trace.home_id);
    let err = |e| AppError::write(&path, e);
    let mut w = create(&path)?;
    write!(w, "timestamp,aggregate_w").map_err(err)?;
    for kind in trace.submetered_w.keys() {
        write!(w, ",{kind}").map_err(err)?;
    }
    writeln!(w).map_err(err)?;
    let items: Vec<Item<'_>> = StrftimeItems::new(TIMESTAMP_FORMAT).collect();
    let columns: Vec<&Vec<f64>> = trace.submetered_w.values().collect();
    for (i, agg) in trace.aggregate_w.iter().enumerate() {
        let ts = trace.timestamp(i).format_with_items(items.iter());
        write!(w, "{ts},{agg}").map_err(err)?;
        for c in &columns {
            write!(w, ",{}", c[i]).map_err(err)?;
        }
        writeln!(w).map_err(err)?;
    }
    w.flush().map_err(err)?;
    Ok(path)
}
