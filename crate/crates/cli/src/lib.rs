//! Command-line front end: Matrix Market bundles, run reports, generation and
//! benchmark sweeps around `gtrs-core`.

pub mod bench;
pub mod bundle;
pub mod commands;
pub mod error;
pub mod mm;
pub mod report;

pub use commands::run;
pub use error::CliError;
