//! Monthly energy disaggregation by neighbourhood matching.
//!
//! A home with only a monthly bill is matched to its `K` most similar
//! submetered homes; each appliance's monthly energy is predicted as the
//! neighbours' average. The crate also carries the comparison baselines
//! (fractional national average, a two-state factorial HMM over minute
//! traces, and an exhaustive subset oracle), the leave-one-out evaluation
//! harness, and a seeded synthetic corpus generator.
//!
//! Everything here is `no_std` + `alloc`. File formats, parallel scheduling
//! and the command line live in the `nilm` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod dataset;
mod error;
pub mod evaluation;
pub mod exact;
pub mod features;
pub mod neighbors;
pub mod oracle;
pub mod syndata;

pub use error::{Error, Result};

pub use dataset::{
    ApplianceKind, Corpus, CorpusBuilder, HomeId, HomeRecord, LoadOptions, MonthlyProfile, StaticCharacteristics,
};
pub use evaluation::{energy_accuracy, MetricConfig, ZeroActualRule};
pub use features::{FeatureSubset, FeatureUnit, FeatureVector, NormalizationSpec};
pub use neighbors::{ApplianceEstimate, DistanceKind, Method, Neighborhood, Provenance};
