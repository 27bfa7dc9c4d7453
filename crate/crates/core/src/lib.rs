//! Dose-finding designs for phase I trials of two-agent combinations.
//!
//! Nine designs share the [`designs::Design`] contract; the [`engine`]
//! runs seeded Monte Carlo studies over true-toxicity scenarios and reports
//! operating characteristics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod decision;
pub mod designs;
pub mod engine;
pub mod error;
pub mod grid;
pub mod history;
pub mod numerics;
pub mod report;
pub mod scenario;
pub mod seeds;
pub mod trial;

pub use config::StudyConfig;
pub use decision::{Action, Decision, MtdResult, Reason};
pub use error::{Error, Result};
pub use grid::{Dose, DoseGrid, DoseMatrix};
pub use scenario::ToxicityScenario;
pub use trial::{CohortRecord, Phase, TrialState};
