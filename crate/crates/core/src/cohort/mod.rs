//! Visit pairing, cohort inclusion rules, feature derivation and outcome labels.

pub mod io;
mod pairs;
mod types;

pub use pairs::{
    build_cohort, build_pairs, dedup_for_independence, filter_pairs, filter_records, label_outcome,
    PairFilter, PatientInfo,
};
pub use types::{
    normal_bp, CohortRecord, Demographics, Encounter, Marital, Medication, Race, Sex, VisitPair,
    CCI_MAX, ECI_MAX, PRESSURE_MAX, PRESSURE_MIN,
};
