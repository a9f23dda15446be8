//! The `subgauss` command-line tool: bound tables, verification suites and
//! simulation campaigns with JSON and CSV reports.

pub mod app;
pub mod config;
pub mod output;
pub mod report;

pub use app::{run, Cli, Outcome};
pub use config::CampaignConfig;
