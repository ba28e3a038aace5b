//! Experiment orchestration: configuration, Monte-Carlo trials, RMSE
//! aggregation, quantum-vs-RF sweeps and result files.

pub mod config;
pub mod output;
pub mod selftest;
pub mod stats;
pub mod sweep;
pub mod trial;

pub use config::{parse_power, Power, ScenarioConfig};
pub use output::{read_records, write_records, write_spectra, OutputFormat, RmseRecord};
pub use stats::{rmse_deg, trial_squared_error, Pairing};
pub use sweep::{run_point, run_sweep, spectrum_dump, SpectrumTable, Sweep, SweepPoint};
pub use trial::{Method, Simulator, TrialOutcome};
