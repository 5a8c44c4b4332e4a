//! Computable comparison methods: the fractional national-average split and
//! a two-state factorial HMM decoded over minute traces.

mod fhmm;
mod hmm;
mod national;
mod trace;

pub use fhmm::{fhmm_decode, fhmm_monthly, monthly_energy, DecodedPath, FhmmModel, MAX_FHMM_APPLIANCES};
pub use hmm::{train_hmm, train_hmm_or_fallback, ApplianceHmm, Gaussian, DEFAULT_STD_FLOOR_W};
pub use national::{national_average, FractionTable};
pub use trace::{month_segments, select_top, select_top5, MinuteTrace, MonthSegment, TrainWindow};
