use alloc::string::String;

use crate::dataset::{ApplianceKind, HomeId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("home {home}: missing month {month} in {series}")]
    MissingMonth { home: HomeId, month: u8, series: String },
    #[error("home {home}: duplicate row for month {month} in {series}")]
    DuplicateRow { home: HomeId, month: u8, series: String },
    #[error("home {home}: month {month} is outside 1..=12")]
    InvalidMonth { home: HomeId, month: i64 },
    #[error("home {home}: negative energy in month {month} of {series}")]
    NegativeEnergy { home: HomeId, month: u8, series: String },
    #[error("home {home}: energy in month {month} of {series} is not finite or exceeds the supported range")]
    EnergyOutOfRange { home: HomeId, month: u8, series: String },
    #[error("home {home}: submetered total {appliance_sum:.3} kWh exceeds aggregate {aggregate:.3} kWh in month {month} beyond slack")]
    ApplianceExceedsAggregate {
        home: HomeId,
        month: u8,
        appliance_sum: f64,
        aggregate: f64,
    },
    #[error("unknown appliance `{0}`")]
    UnknownAppliance(String),
    #[error("home {home}: missing static characteristic `{field}`")]
    MissingStatic { home: HomeId, field: &'static str },
    #[error("home {home}: static characteristic `{field}` must be positive")]
    InvalidStatic { home: HomeId, field: &'static str },
    #[error("duplicate home id {0}")]
    DuplicateHome(HomeId),
    #[error("rows reference home {0} which is not listed in the homes table")]
    UnknownHome(HomeId),
    #[error("no home satisfies the filter")]
    EmptyResult,
    #[error("home {0}: aggregate profile is zero in every month")]
    DegenerateProfile(HomeId),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k = {k} is invalid for a reference set of {available} homes")]
    KTooLarge { k: usize, available: usize },
    #[error("test home {0} is present in its own reference set")]
    TestHomeInReference(HomeId),
    #[error("home {home} has no submetered data for {appliance}")]
    MissingApplianceData { home: HomeId, appliance: ApplianceKind },
    #[error("no fraction configured for {0}")]
    MissingFraction(ApplianceKind),
    #[error("invalid fraction table: {0}")]
    InvalidFraction(String),
    #[error("{appliance}: minute power is constant at {value_w} W")]
    ConstantSignal { appliance: ApplianceKind, value_w: f64 },
    #[error("training window holds no minutes of the trace")]
    EmptyWindow,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid HMM: {0}")]
    InvalidHmm(String),
    #[error("a factorial model holds 1 to 5 appliances, got {0}")]
    ModelSize(usize),
    #[error("oracle search needs at least one candidate home")]
    NoCandidates,
    #[error("exhaustive oracle over {candidates} candidates exceeds the cap of {cap}")]
    CapExceeded { candidates: usize, cap: usize },
    #[error("no evaluable (home, month) samples")]
    NoSamples,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{appliance} in month {month}: {energy_kwh:.3} kWh cannot be drawn at {on_power_w:.1} W")]
    InfeasibleDutyCycle {
        appliance: ApplianceKind,
        month: u8,
        energy_kwh: f64,
        on_power_w: f64,
    },
}

impl Error {
    /// True for errors caused by the input data rather than by configuration.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::InvalidConfig(_)
                | Error::KTooLarge { .. }
                | Error::CapExceeded { .. }
                | Error::InvalidFraction(_)
                | Error::MissingFraction(_)
                | Error::ModelSize(_)
        )
    }
}
