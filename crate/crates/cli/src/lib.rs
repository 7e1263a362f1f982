//! Command-line orchestration of the sleepstage pipeline.
//!
//! `run` executes every stage from epoch stores (or raw EDF directories) to
//! evaluation reports and attribution rankings, recording the configuration,
//! input hashes, stage order and timings in a `manifest.json` written last.
//! The remaining subcommands expose each stage on its own artifacts.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical error.

pub mod app;
pub mod artifacts;
pub mod config;
pub mod error;
pub mod fsutil;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod stages;

pub use app::run_cli;
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use ingest::{cmd_ingest, IngestOptions, IngestSummary};
pub use pipeline::{cmd_run, RunManifest, RunReport, STAGE_ORDER};
pub use report::cmd_report;
