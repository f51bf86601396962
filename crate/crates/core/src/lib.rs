//! Scheduling planting days for year-round seed production.
//!
//! The pipeline, end to end: ingest historical growing-degree-unit (GDU)
//! series and seed-population tables ([`ingest`]), train a recurrent GDU
//! forecaster ([`forecaster`]), wrap it with a Gaussian-process residual
//! model and roll out Monte Carlo GDU scenarios ([`rio`]), map candidate
//! planting days to harvest weeks under every scenario ([`harvest`]), and
//! pick planting days that keep weekly harvest volumes inside site capacity
//! ([`scheduler`]).
//!
//! Everything downstream of ingest is deterministic given the configured
//! seeds: reruns produce byte-identical artifacts.

pub mod domain;
pub mod error;
pub mod forecaster;
pub mod harvest;
pub mod ingest;
pub mod rio;
pub mod scheduler;

pub use error::{Error, ErrorCategory, Result};

/// Library version, recorded in run manifests for reproducibility.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
