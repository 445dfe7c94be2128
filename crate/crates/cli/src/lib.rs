//! Experiment runner behind the `spcfr` binary: game selection, CSV traces,
//! parameter sweeps and the invariant check suites.

pub mod config;
pub mod error;
pub mod run;
pub mod sweep;
pub mod trace_csv;

pub use config::{GameSpec, RunConfig, SEED_ENV};
pub use error::CliError;
pub use run::{run, run_on, RunReport};
pub use sweep::{sweep, SweepConfig, SweepEntry};
