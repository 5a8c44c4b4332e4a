//! File formats.

pub mod corpus;
pub mod outputs;
pub mod tables;
pub mod traces;

pub use corpus::{load_corpus, load_unmetered, write_corpus, CorpusPaths};
pub use tables::{format_fractions, parse_fractions, read_fractions, read_reference_accuracies};
pub use traces::{read_trace, read_trace_file, trace_path, write_trace};
