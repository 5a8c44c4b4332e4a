//! `homes.csv`, `aggregate.csv` and `appliances.csv`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nilm_core::dataset::DroppedSeries;
use nilm_core::{Corpus, CorpusBuilder, HomeId, LoadOptions, MetricConfig};
use serde::Deserialize;

use crate::error::{AppError, AppResult};
use crate::io::outputs::write_lines;

/// Locations of the three corpus tables.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CorpusPaths {
    pub homes: PathBuf,
    pub aggregate: PathBuf,
    pub appliances: PathBuf,
}

impl CorpusPaths {
    /// The conventional file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        CorpusPaths {
            homes: dir.join("homes.csv"),
            aggregate: dir.join("aggregate.csv"),
            appliances: dir.join("appliances.csv"),
        }
    }
}

#[derive(Deserialize)]
struct HomeRow {
    home_id: String,
    area_sqft: Option<f64>,
    occupants: Option<u32>,
    rooms: Option<u32>,
}

#[derive(Deserialize)]
struct AggregateRow {
    home_id: String,
    month: i64,
    energy_kwh: f64,
}

#[derive(Deserialize)]
struct ApplianceRow {
    home_id: String,
    appliance: String,
    month: i64,
    energy_kwh: f64,
}

fn reader(path: &Path) -> AppResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| AppError::read(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Deserialises every row of `path` into `f`.
pub(crate) fn for_each_row<T, F>(path: &Path, mut f: F) -> AppResult<()>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(T) -> nilm_core::Result<()>,
{
    let mut rdr = reader(path)?;
    for row in rdr.deserialize::<T>() {
        let row = row.map_err(|e| AppError::csv(path, e))?;
        f(row).map_err(|source| AppError::InFile {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// Reads and validates a corpus. Row order within each file is irrelevant.
pub fn load_corpus(
    paths: &CorpusPaths,
    options: LoadOptions,
    metric: MetricConfig,
) -> AppResult<(Corpus, Vec<DroppedSeries>)> {
    let mut builder = CorpusBuilder::new(options);
    for_each_row(&paths.homes, |r: HomeRow| {
        builder.add_home(HomeId::new(r.home_id), r.area_sqft, r.occupants, r.rooms)
    })?;
    for_each_row(&paths.aggregate, |r: AggregateRow| {
        builder.add_aggregate(HomeId::new(r.home_id), r.month, r.energy_kwh)
    })?;
    for_each_row(&paths.appliances, |r: ApplianceRow| {
        builder.add_appliance(HomeId::new(r.home_id), &r.appliance, r.month, r.energy_kwh)
    })?;
    let (corpus, dropped) = builder.build(metric)?;
    for d in &dropped {
        log::warn!(
            "dropped {} series of home {}: month {} missing",
            d.appliance,
            d.home,
            d.missing_month
        );
    }
    Ok((corpus, dropped))
}

/// Reads only `homes.csv` and `aggregate.csv`, for homes without submetering.
pub fn load_unmetered(homes: &Path, aggregate: &Path, metric: MetricConfig) -> AppResult<Corpus> {
    let mut builder = CorpusBuilder::new(LoadOptions::default());
    for_each_row(homes, |r: HomeRow| {
        builder.add_home(HomeId::new(r.home_id), r.area_sqft, r.occupants, r.rooms)
    })?;
    for_each_row(aggregate, |r: AggregateRow| {
        builder.add_aggregate(HomeId::new(r.home_id), r.month, r.energy_kwh)
    })?;
    Ok(builder.build(metric)?.0)
}

pub(crate) fn create(path: &Path) -> AppResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| AppError::write(parent, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| AppError::write(path, e))
}

/// Writes `corpus` as the three tables. Floats use the shortest
/// representation that reads back to the same value.
pub fn write_corpus(paths: &CorpusPaths, corpus: &Corpus) -> AppResult<()> {
    let homes = corpus.homes();
    write_lines(
        &paths.homes,
        "home_id,area_sqft,occupants,rooms",
        homes.iter().map(|h| {
            let s = &h.statics;
            format!("{},{},{},{}", h.home_id, s.area_sqft, s.occupants, s.rooms)
        }),
    )?;
    write_lines(
        &paths.aggregate,
        "home_id,month,energy_kwh",
        homes.iter().flat_map(|h| {
            h.aggregate
                .values()
                .iter()
                .enumerate()
                .map(move |(m, v)| format!("{},{},{}", h.home_id, m + 1, v))
        }),
    )?;
    write_lines(
        &paths.appliances,
        "home_id,appliance,month,energy_kwh",
        homes.iter().flat_map(|h| {
            h.appliances.iter().flat_map(move |(kind, profile)| {
                profile
                    .values()
                    .iter()
                    .enumerate()
                    .map(move |(m, v)| format!("{},{},{},{}", h.home_id, kind, m + 1, v))
            })
        }),
    )
}
