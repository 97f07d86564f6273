//! Average treatment effect of amlodipine against lisinopril on blood
//! pressure reduction: Hajek IPW and S-, T- and X-learners, compared on the
//! full cohort and on its adherent subset.

mod estimators;
mod report;

pub use estimators::{
    fit_propensity, ipw_ate, ipw_ate_with, naive_difference, s_learner, t_learner, x_learner,
    PROPENSITY_CLIP,
};
pub use report::{ate_comparison, AteCell, AteOptions, AteReport, DatasetKind, Estimator, Outcome};

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortRecord, Medication};
use crate::error::{Error, Result};
use crate::learners::{encode, EncodingMetadata, FeatureMatrix};

/// Confounders, binary treatment (1 = amlodipine) and outcome in mmHg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalDataset {
    pub x: FeatureMatrix,
    pub t: Vec<u8>,
    pub y: Vec<f64>,
}

impl CausalDataset {
    pub fn new(x: FeatureMatrix, t: Vec<u8>, y: Vec<f64>) -> Result<Self> {
        for len in [t.len(), y.len()] {
            if len != x.n_rows {
                return Err(Error::LengthMismatch {
                    left: x.n_rows,
                    right: len,
                });
            }
        }
        if t.iter().any(|&v| v > 1) {
            return Err(Error::InvalidInput("treatment must be 0/1".into()));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("outcome {v} is not finite")));
        }
        for (arm, name) in [(1, "treated"), (0, "control")] {
            if !t.contains(&arm) {
                return Err(Error::EmptyGroup(format!("{name} arm")));
            }
        }
        Ok(Self { x, t, y })
    }

    /// Records whose primary medication is amlodipine or lisinopril, with
    /// the remaining characteristics as confounders.
    pub fn from_records(records: &[CohortRecord], outcome: Outcome, metadata: Option<&EncodingMetadata>) -> Result<Self> {
        let arms = comparator_records(records);
        let fitted;
        let meta = match metadata {
            Some(m) => m,
            None => {
                fitted = EncodingMetadata::fit(&arms, false)?;
                &fitted
            }
        };
        let x = encode(&arms, Some(meta))?;
        let t = arms
            .iter()
            .map(|r| u8::from(r.primary_medication() == Some(Medication::Amlodipine)))
            .collect();
        let y = arms
            .iter()
            .map(|r| outcome.value(r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(x, t, y)
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn arm(&self, treated: u8) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.t[i] == treated).collect()
    }
}

/// Records in the two comparator arms, in input order.
pub fn comparator_records(records: &[CohortRecord]) -> Vec<CohortRecord> {
    records
        .iter()
        .filter(|r| matches!(r.primary_medication(), Some(Medication::Amlodipine | Medication::Lisinopril)))
        .cloned()
        .collect()
}
