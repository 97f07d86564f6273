use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::estimators::{ipw_ate, s_learner, t_learner, x_learner};
use super::{comparator_records, CausalDataset};
use crate::cohort::CohortRecord;
use crate::error::{Error, Result};
use crate::learners::{BaseLearner, EncodingMetadata};

categorical!(Estimator {
    Ipw => "ipw",
    SLearner => "s_learner",
    TLearner => "t_learner",
    XLearner => "x_learner",
});

categorical!(Outcome {
    Diastolic => "diastolic",
    Systolic => "systolic",
});

categorical!(DatasetKind {
    Full => "full",
    AdherentOnly => "adherent_only",
});

impl Outcome {
    pub fn value(self, r: &CohortRecord) -> Result<f64> {
        let v = match self {
            Outcome::Diastolic => r.diastolic_reduction,
            Outcome::Systolic => r.systolic_reduction,
        };
        v.ok_or_else(|| Error::MissingValue {
            pair_id: r.pair_id(),
            what: match self {
                Outcome::Diastolic => "diastolic reduction",
                Outcome::Systolic => "systolic reduction",
            },
        })
    }
}

impl Estimator {
    pub fn estimate(self, ds: &CausalDataset, base: &BaseLearner, seed: u64) -> Result<f64> {
        match self {
            Estimator::Ipw => ipw_ate(ds),
            Estimator::SLearner => s_learner(ds, base, seed),
            Estimator::TLearner => t_learner(ds, base, seed),
            Estimator::XLearner => x_learner(ds, base, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AteOptions {
    pub base: BaseLearner,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    pub outcomes: Vec<Outcome>,
    pub datasets: Vec<DatasetKind>,
    /// Smallest adherent subset, per arm, accepted for estimation.
    pub min_arm_size: usize,
}

impl Default for AteOptions {
    fn default() -> Self {
        Self {
            base: BaseLearner::default(),
            seed: 0,
            estimators: Estimator::ALL.to_vec(),
            outcomes: Outcome::ALL.to_vec(),
            datasets: DatasetKind::ALL.to_vec(),
            min_arm_size: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteCell {
    pub estimator: Estimator,
    pub outcome: Outcome,
    pub dataset: DatasetKind,
    pub ate: f64,
}

/// Estimator x outcome x dataset grid of effects in mmHg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteReport {
    pub cells: Vec<AteCell>,
}

impl AteReport {
    pub fn get(&self, estimator: Estimator, outcome: Outcome, dataset: DatasetKind) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.estimator == estimator && c.outcome == outcome && c.dataset == dataset)
            .map(|c| c.ate)
    }

    /// True when every estimator, outcome and dataset combination is present.
    pub fn is_complete(&self) -> bool {
        Estimator::ALL.iter().all(|&e| {
            Outcome::ALL
                .iter()
                .all(|&o| DatasetKind::ALL.iter().all(|&d| self.get(e, o, d).is_some()))
        })
    }

    /// One row per dataset, one column per outcome and estimator; missing cells print as "-".
    pub fn to_table(&self) -> String {
        let mut header = vec!["dataset".to_string()];
        for o in Outcome::ALL {
            for e in Estimator::ALL {
                header.push(format!("{o}/{e}"));
            }
        }
        let mut lines = vec![header.join("\t")];
        for d in DatasetKind::ALL {
            let mut row = vec![d.to_string()];
            for o in Outcome::ALL {
                for e in Estimator::ALL {
                    row.push(self.get(*e, *o, *d).map_or("-".into(), |v| format!("{v:.2}")));
                }
            }
            lines.push(row.join("\t"));
        }
        lines.join("\n") + "\n"
    }

    /// Columnar form: `estimator,outcome,dataset,ate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimator,outcome,dataset,ate\n");
        for c in &self.cells {
            out.push_str(&format!("{},{},{},{}\n", c.estimator, c.outcome, c.dataset, c.ate));
        }
        out
    }
}

/// Runs the selected estimators on the comparator arms of `records` and on
/// their adherent subset. Every record needs an adherence label.
pub fn ate_comparison(records: &[CohortRecord], options: &AteOptions) -> Result<AteReport> {
    let full = comparator_records(records);
    if let Some(r) = full.iter().find(|r| r.adherence.is_none()) {
        return Err(Error::MissingLabel { pair_id: r.pair_id() });
    }
    let adherent: Vec<CohortRecord> = full.iter().filter(|r| r.is_non_adherent() == Some(false)).cloned().collect();
    let meta = EncodingMetadata::fit(&full, false)?;

    let mut datasets = Vec::new();
    for &kind in &options.datasets {
        let recs = match kind {
            DatasetKind::Full => &full,
            DatasetKind::AdherentOnly => &adherent,
        };
        for &outcome in &options.outcomes {
            let ds = CausalDataset::from_records(recs, outcome, Some(&meta))?;
            let smallest = ds.arm(1).len().min(ds.arm(0).len());
            if smallest < options.min_arm_size {
                return Err(Error::Infeasible(format!(
                    "{kind} data has {smallest} records in its smaller arm, need {}",
                    options.min_arm_size
                )));
            }
            datasets.push((kind, outcome, ds));
        }
    }
    let jobs: Vec<(Estimator, usize)> = options
        .estimators
        .iter()
        .flat_map(|&e| (0..datasets.len()).map(move |k| (e, k)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(estimator, k)| {
            let (dataset, outcome, ds) = &datasets[k];
            Ok(AteCell {
                estimator,
                outcome: *outcome,
                dataset: *dataset,
                ate: estimator.estimate(ds, &options.base, options.seed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AteReport { cells })
}
