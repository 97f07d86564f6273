//! Treatment non-adherence analysis for hypertension cohorts: visit pairing,
//! adherence extraction from clinical notes, factor analysis, treatment-effect
//! estimation, outcome prediction with fairness auditing, and synthetic cohorts
//! with a known causal structure.

#[macro_use]
mod macros;

pub mod causal;
pub mod cohort;
pub mod error;
pub mod extraction;
pub mod fairness;
pub mod harness;
pub mod learners;
pub mod stats;
pub mod synthcohort;
pub mod topics;

pub use error::{Error, Result};
