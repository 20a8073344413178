//! Regression test prioritization driven by field usage and change history.
//!
//! The crate is organised as a pipeline of stages, each usable on its own:
//!
//! * [`telemetry`] turns raw session logs into a sparse user × component
//!   access-frequency matrix.
//! * [`cf`] completes that matrix with item-based collaborative filtering and
//!   derives a per-component frequency score.
//! * [`change_risk`] fits a linear defect model over change-history metrics and
//!   produces per-component change-risk scores, with repeated k-fold
//!   cross-validation for accuracy reporting.
//! * [`prioritize`] combines the two scores and orders a test suite, next to
//!   four baseline orderings.
//! * [`evaluation`] scores orderings with APFD / NAPFD over execution budgets.
//! * [`synth`] generates seeded synthetic projects for end-to-end experiments.
//! * [`cli`] wires everything into the `riskrec` command-line tool.

pub mod cf;
pub mod change_risk;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod prioritize;
pub mod synth;
pub mod telemetry;

mod table;

pub use error::{Error, Result};

/// Tool version embedded in every output file header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
