//! Home data model, row-level corpus ingestion and completeness filtering.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::evaluation::MetricConfig;
use crate::exact::MAX_ENERGY_KWH;
use crate::{Error, Result};

/// Appliances tracked by the corpus. The six named kinds are the evaluated
/// loads; `Other` carries any further submetered column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ApplianceKind {
    Fridge,
    Hvac,
    WashingMachine,
    DishWasher,
    Dryer,
    Lights,
    Other(String),
}

impl ApplianceKind {
    pub const EVALUATED: [ApplianceKind; 6] = [
        ApplianceKind::Fridge,
        ApplianceKind::Hvac,
        ApplianceKind::WashingMachine,
        ApplianceKind::DishWasher,
        ApplianceKind::Dryer,
        ApplianceKind::Lights,
    ];

    /// Canonical CSV name.
    pub fn name(&self) -> &str {
        match self {
            ApplianceKind::Fridge => "fridge",
            ApplianceKind::Hvac => "hvac",
            ApplianceKind::WashingMachine => "washing_machine",
            ApplianceKind::DishWasher => "dish_washer",
            ApplianceKind::Dryer => "dryer",
            ApplianceKind::Lights => "lights",
            ApplianceKind::Other(name) => name,
        }
    }

    /// Parses a canonical name, case-insensitively. Unknown names are an
    /// error when `strict`, otherwise they become `Other(lowercased)`.
    pub fn parse(name: &str, strict: bool) -> Result<Self> {
        let trimmed = name.trim();
        let lower = trimmed.to_ascii_lowercase();
        for kind in Self::EVALUATED {
            if kind.name() == lower {
                return Ok(kind);
            }
        }
        if strict || lower.is_empty() {
            Err(Error::UnknownAppliance(trimmed.to_string()))
        } else {
            Ok(ApplianceKind::Other(lower))
        }
    }

    pub fn is_evaluated(&self) -> bool {
        !matches!(self, ApplianceKind::Other(_))
    }
}

impl fmt::Display for ApplianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ApplianceKind {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ApplianceKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        ApplianceKind::parse(&name, false).map_err(serde::de::Error::custom)
    }
}

/// Opaque home identifier; ordering is plain string ordering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HomeId(String);

impl HomeId {
    pub fn new(id: impl Into<String>) -> Self {
        HomeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for HomeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for HomeId {
    fn from(s: &str) -> Self {
        HomeId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticCharacteristics {
    pub area_sqft: f64,
    pub occupants: u32,
    pub rooms: u32,
}

impl StaticCharacteristics {
    fn validate(&self, home: &HomeId) -> Result<()> {
        if !(self.area_sqft.is_finite() && self.area_sqft > 0.0) {
            return Err(Error::InvalidStatic {
                home: home.clone(),
                field: "area_sqft",
            });
        }
        if self.occupants == 0 {
            return Err(Error::InvalidStatic {
                home: home.clone(),
                field: "occupants",
            });
        }
        if self.rooms == 0 {
            return Err(Error::InvalidStatic {
                home: home.clone(),
                field: "rooms",
            });
        }
        Ok(())
    }
}

/// Twelve monthly energies in kWh, January first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MonthlyProfile([f64; 12]);

impl MonthlyProfile {
    pub fn new(values: [f64; 12]) -> Result<Self> {
        if let Some(m) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "monthly energy for month {} must be finite and non-negative",
                m + 1
            )));
        }
        Ok(MonthlyProfile(values))
    }

    pub(crate) fn new_unchecked(values: [f64; 12]) -> Self {
        MonthlyProfile(values)
    }

    pub fn zeros() -> Self {
        MonthlyProfile([0.0; 12])
    }

    pub fn values(&self) -> &[f64; 12] {
        &self.0
    }

    /// Energy for calendar month `month` (1..=12).
    pub fn month(&self, month: u8) -> f64 {
        self.0[usize::from(month) - 1]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.0;
        for v in out.iter_mut() {
            *v *= factor;
        }
        MonthlyProfile(out)
    }

    fn validate(&self, home: &HomeId, series: &str) -> Result<()> {
        for (i, v) in self.0.iter().enumerate() {
            let month = i as u8 + 1;
            if v.is_nan() || !(*v < MAX_ENERGY_KWH) {
                return Err(Error::EnergyOutOfRange {
                    home: home.clone(),
                    month,
                    series: series.to_string(),
                });
            }
            if *v < 0.0 {
                return Err(Error::NegativeEnergy {
                    home: home.clone(),
                    month,
                    series: series.to_string(),
                });
            }
        }
        Ok(())
    }
}

impl From<MonthlyProfile> for [f64; 12] {
    fn from(p: MonthlyProfile) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomeRecord {
    pub home_id: HomeId,
    pub statics: StaticCharacteristics,
    pub aggregate: MonthlyProfile,
    /// Submetered appliance profiles; empty for an unsubmetered home.
    pub appliances: BTreeMap<ApplianceKind, MonthlyProfile>,
}

impl HomeRecord {
    pub fn appliance(&self, kind: &ApplianceKind) -> Result<&MonthlyProfile> {
        self.appliances.get(kind).ok_or_else(|| Error::MissingApplianceData {
            home: self.home_id.clone(),
            appliance: kind.clone(),
        })
    }

    /// Checks statics, energy ranges and that submetered loads do not exceed
    /// the mains reading by more than `slack` (a fraction of the aggregate).
    pub fn validate(&self, slack: f64) -> Result<()> {
        self.statics.validate(&self.home_id)?;
        self.aggregate.validate(&self.home_id, "aggregate")?;
        for (kind, profile) in &self.appliances {
            profile.validate(&self.home_id, kind.name())?;
        }
        for m in 0..12 {
            let appliance_sum: f64 = self.appliances.values().map(|p| p.0[m]).sum();
            let aggregate = self.aggregate.0[m];
            if appliance_sum > aggregate * (1.0 + slack) {
                return Err(Error::ApplianceExceedsAggregate {
                    home: self.home_id.clone(),
                    month: m as u8 + 1,
                    appliance_sum,
                    aggregate,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    /// Reject unknown appliance names and incomplete appliance series instead
    /// of mapping them to `Other` / dropping them.
    pub strict: bool,
    /// Tolerated excess of submetered total over the aggregate, as a fraction.
    pub slack: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            strict: false,
            slack: 0.05,
        }
    }
}

/// A series dropped during a lenient load.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedSeries {
    pub home: HomeId,
    pub appliance: ApplianceKind,
    pub missing_month: u8,
}

#[derive(Debug, Default)]
struct PartialHome {
    area_sqft: Option<f64>,
    occupants: Option<u32>,
    rooms: Option<u32>,
    aggregate: [Option<f64>; 12],
    appliances: BTreeMap<ApplianceKind, [Option<f64>; 12]>,
}

/// Collects table rows in any order and assembles a validated [`Corpus`].
#[derive(Debug, Default)]
pub struct CorpusBuilder {
    options: LoadOptions,
    homes: BTreeMap<HomeId, PartialHome>,
    // Aggregate/appliance rows may arrive before the homes table row.
    listed: BTreeSet<HomeId>,
    dropped: Vec<DroppedSeries>,
}

fn check_month(home: &HomeId, month: i64) -> Result<usize> {
    if (1..=12).contains(&month) {
        Ok(month as usize - 1)
    } else {
        Err(Error::InvalidMonth {
            home: home.clone(),
            month,
        })
    }
}

impl CorpusBuilder {
    pub fn new(options: LoadOptions) -> Self {
        CorpusBuilder {
            options,
            ..Default::default()
        }
    }

    pub fn add_home(
        &mut self,
        home: HomeId,
        area_sqft: Option<f64>,
        occupants: Option<u32>,
        rooms: Option<u32>,
    ) -> Result<()> {
        if !self.listed.insert(home.clone()) {
            return Err(Error::DuplicateHome(home));
        }
        let entry = self.homes.entry(home).or_default();
        entry.area_sqft = area_sqft;
        entry.occupants = occupants;
        entry.rooms = rooms;
        Ok(())
    }

    pub fn add_aggregate(&mut self, home: HomeId, month: i64, energy_kwh: f64) -> Result<()> {
        let idx = check_month(&home, month)?;
        let entry = self.homes.entry(home.clone()).or_default();
        if entry.aggregate[idx].replace(energy_kwh).is_some() {
            return Err(Error::DuplicateRow {
                home,
                month: idx as u8 + 1,
                series: "aggregate".to_string(),
            });
        }
        Ok(())
    }

    pub fn add_appliance(&mut self, home: HomeId, appliance: &str, month: i64, energy_kwh: f64) -> Result<()> {
        let kind = ApplianceKind::parse(appliance, self.options.strict)?;
        let idx = check_month(&home, month)?;
        let entry = self.homes.entry(home.clone()).or_default();
        let series = entry.appliances.entry(kind.clone()).or_insert([None; 12]);
        if series[idx].replace(energy_kwh).is_some() {
            return Err(Error::DuplicateRow {
                home,
                month: idx as u8 + 1,
                series: kind.name().to_string(),
            });
        }
        Ok(())
    }

    /// Series dropped so far (only populated by [`CorpusBuilder::build`] in
    /// lenient mode).
    pub fn dropped(&self) -> &[DroppedSeries] {
        &self.dropped
    }

    pub fn build(self, metric: MetricConfig) -> Result<(Corpus, Vec<DroppedSeries>)> {
        let mut homes = Vec::with_capacity(self.homes.len());
        let mut dropped = self.dropped;
        for (id, partial) in self.homes {
            if !self.listed.contains(&id) {
                return Err(Error::UnknownHome(id));
            }
            let statics = StaticCharacteristics {
                area_sqft: partial.area_sqft.ok_or_else(|| Error::MissingStatic {
                    home: id.clone(),
                    field: "area_sqft",
                })?,
                occupants: partial.occupants.ok_or_else(|| Error::MissingStatic {
                    home: id.clone(),
                    field: "occupants",
                })?,
                rooms: partial.rooms.ok_or_else(|| Error::MissingStatic {
                    home: id.clone(),
                    field: "rooms",
                })?,
            };
            let aggregate = complete(&partial.aggregate).map_err(|month| Error::MissingMonth {
                home: id.clone(),
                month,
                series: "aggregate".to_string(),
            })?;
            let mut appliances = BTreeMap::new();
            for (kind, series) in partial.appliances {
                match complete(&series) {
                    Ok(profile) => {
                        appliances.insert(kind, profile);
                    }
                    Err(month) if self.options.strict => {
                        return Err(Error::MissingMonth {
                            home: id.clone(),
                            month,
                            series: kind.name().to_string(),
                        })
                    }
                    Err(month) => dropped.push(DroppedSeries {
                        home: id.clone(),
                        appliance: kind,
                        missing_month: month,
                    }),
                }
            }
            homes.push(HomeRecord {
                home_id: id,
                statics,
                aggregate,
                appliances,
            });
        }
        let corpus = Corpus::new(homes, metric, self.options.slack)?;
        Ok((corpus, dropped))
    }
}

fn complete(series: &[Option<f64>; 12]) -> core::result::Result<MonthlyProfile, u8> {
    let mut out = [0.0; 12];
    for (i, v) in series.iter().enumerate() {
        out[i] = v.ok_or(i as u8 + 1)?;
    }
    Ok(MonthlyProfile(out))
}

/// Why [`Corpus::filter_complete`] excluded a home.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Exclusion {
    MissingAppliance(ApplianceKind),
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    pub corpus: Corpus,
    pub excluded: Vec<(HomeId, Exclusion)>,
}

/// A validated set of homes, kept sorted by `home_id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    homes: Vec<HomeRecord>,
    pub metric: MetricConfig,
    pub slack: f64,
}

impl Corpus {
    pub fn new(mut homes: Vec<HomeRecord>, metric: MetricConfig, slack: f64) -> Result<Self> {
        if !(slack.is_finite() && slack >= 0.0) {
            return Err(Error::InvalidConfig("slack must be non-negative".to_string()));
        }
        metric.validate()?;
        homes.sort_by(|a, b| a.home_id.cmp(&b.home_id));
        for pair in homes.windows(2) {
            if pair[0].home_id == pair[1].home_id {
                return Err(Error::DuplicateHome(pair[0].home_id.clone()));
            }
        }
        for home in &homes {
            home.validate(slack)?;
        }
        Ok(Corpus { homes, metric, slack })
    }

    pub fn homes(&self) -> &[HomeRecord] {
        &self.homes
    }

    pub fn len(&self) -> usize {
        self.homes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.homes.is_empty()
    }

    pub fn get(&self, id: &HomeId) -> Option<&HomeRecord> {
        self.homes
            .binary_search_by(|h| h.home_id.cmp(id))
            .ok()
            .map(|i| &self.homes[i])
    }

    pub fn position(&self, id: &HomeId) -> Option<usize> {
        self.homes.binary_search_by(|h| h.home_id.cmp(id)).ok()
    }

    /// Keeps homes that have every `required` appliance submetered for all
    /// twelve months.
    pub fn filter_complete(&self, required: &BTreeSet<ApplianceKind>) -> Result<FilterOutcome> {
        let mut kept = Vec::new();
        let mut excluded = Vec::new();
        for home in &self.homes {
            match required.iter().find(|a| !home.appliances.contains_key(*a)) {
                Some(missing) => excluded.push((home.home_id.clone(), Exclusion::MissingAppliance(missing.clone()))),
                None => kept.push(home.clone()),
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyResult);
        }
        Ok(FilterOutcome {
            corpus: Corpus {
                homes: kept,
                metric: self.metric.clone(),
                slack: self.slack,
            },
            excluded,
        })
    }

    /// A copy of this corpus restricted to the listed homes.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a HomeId>) -> Corpus {
        let wanted: BTreeSet<&HomeId> = ids.into_iter().collect();
        Corpus {
            homes: self
                .homes
                .iter()
                .filter(|h| wanted.contains(&h.home_id))
                .cloned()
                .collect(),
            metric: self.metric.clone(),
            slack: self.slack,
        }
    }
}
