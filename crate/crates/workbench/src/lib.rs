//! Planning configuration, command line, run store and the /v1/ HTTP API on
//! top of `basinplan-core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod stages;
pub mod store;

pub use config::PlanningConfig;
pub use error::{ErrorDoc, WbError};
pub use store::{LedgerEntry, RunRecord, RunStore};
