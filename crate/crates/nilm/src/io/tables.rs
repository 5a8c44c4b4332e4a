//! Fraction tables (TOML, percent per appliance) and reference accuracies
//! (`appliance,source_label,accuracy_percent`).

use std::collections::BTreeMap;
use std::path::Path;

use nilm_core::baselines::FractionTable;
use nilm_core::evaluation::ReferenceAccuracy;
use nilm_core::ApplianceKind;
use serde::Deserialize;

use crate::error::{AppError, AppResult};
use crate::io::corpus::for_each_row;

/// Parses a fraction table such as
///
/// ```toml
/// hvac = 18
/// fridge = 7
/// ```
///
/// Values are percentages of the monthly aggregate.
pub fn parse_fractions(text: &str) -> Result<FractionTable, String> {
    let raw: BTreeMap<String, f64> = toml::from_str(text).map_err(|e| e.to_string())?;
    let mut fractions = BTreeMap::new();
    for (name, percent) in raw {
        let kind = ApplianceKind::parse(&name, true).map_err(|e| e.to_string())?;
        fractions.insert(kind, percent / 100.0);
    }
    FractionTable::new(fractions).map_err(|e| e.to_string())
}

pub fn read_fractions(path: &Path) -> AppResult<FractionTable> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::read(path, e))?;
    parse_fractions(&text).map_err(|msg| AppError::Usage(format!("{}: {msg}", path.display())))
}

pub fn format_fractions(table: &FractionTable) -> String {
    let mut out = String::from("# Percent of monthly aggregate energy per appliance.\n");
    for (kind, f) in table.iter() {
        out.push_str(&format!("{kind} = {}\n", f * 100.0));
    }
    out
}

#[derive(Deserialize)]
struct ReferenceRow {
    appliance: String,
    source_label: String,
    accuracy_percent: f64,
}

pub fn read_reference_accuracies(path: &Path) -> AppResult<Vec<ReferenceAccuracy>> {
    let mut out = Vec::new();
    for_each_row(path, |r: ReferenceRow| {
        if !(0.0..=100.0).contains(&r.accuracy_percent) {
            return Err(nilm_core::Error::InvalidConfig(format!(
                "reference accuracy {} is outside [0, 100]",
                r.accuracy_percent
            )));
        }
        out.push(ReferenceAccuracy {
            appliance: ApplianceKind::parse(&r.appliance, true)?,
            source_label: r.source_label,
            accuracy_percent: r.accuracy_percent,
        });
        Ok(())
    })?;
    Ok(out)
}
