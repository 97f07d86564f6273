//! Synthetic cohorts with a known causal structure: covariates matched to
//! published marginals, logistic non-adherence, and a linear outcome model
//! in which non-adherence scales down the drug response.

mod calibrate;
mod config;
mod generate;
mod notes;

pub use calibrate::{calibrate_prevalence, expected_rate, CALIBRATION_N, CALIBRATION_SEED};
pub use config::{
    Coefficients, CovariateSpec, Covariates, FirstVisitSpec, NoteSpec, PerType, PressurePair,
    ResponseSpec, SynthConfig, TreatmentSpec, AGE_CENTER, DEFAULT_ADHERENCE_INTERCEPT,
    DIASTOLIC_CENTER, SYSTOLIC_CENTER,
};
pub use generate::{
    generate_cohort, non_adherence_by_medication, true_ate, true_ate_where, GroundTruth,
    RecordTruth,
};
