//! Group fairness of hard classifications: demographic parity and
//! equalized-odds gaps between a focal group and everyone else.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::cohort::Race;
use crate::error::{Error, Result};

/// Per-record group membership (1 = focal), true label and prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupOutcomes {
    pub group: Vec<u8>,
    pub label: Vec<u8>,
    pub predicted: Vec<u8>,
}

impl GroupOutcomes {
    pub fn new(group: Vec<u8>, label: Vec<u8>, predicted: Vec<u8>) -> Result<Self> {
        for other in [label.len(), predicted.len()] {
            if other != group.len() {
                return Err(Error::LengthMismatch {
                    left: group.len(),
                    right: other,
                });
            }
        }
        if group.iter().chain(&label).chain(&predicted).any(|&v| v > 1) {
            return Err(Error::InvalidInput("group, label and prediction must be 0/1".into()));
        }
        Ok(Self {
            group,
            label,
            predicted,
        })
    }

    /// Focal group = records whose race is `focal`; the rest form the comparison group.
    pub fn one_vs_rest(races: &[Race], focal: Race, label: Vec<u8>, predicted: Vec<u8>) -> Result<Self> {
        let group = races.iter().map(|r| u8::from(*r == focal)).collect();
        Self::new(group, label, predicted)
    }

    /// Positive-prediction rate among records of group `g` with `keep(label)`.
    fn rate(&self, g: u8, keep: impl Fn(u8) -> bool) -> Option<f64> {
        let (mut pos, mut n) = (0usize, 0usize);
        for i in 0..self.group.len() {
            if self.group[i] == g && keep(self.label[i]) {
                n += 1;
                pos += usize::from(self.predicted[i]);
            }
        }
        (n > 0).then(|| pos as f64 / n as f64)
    }
}

fn gap(outcomes: &GroupOutcomes, keep: impl Fn(u8) -> bool + Copy) -> Option<f64> {
    Some((outcomes.rate(1, keep)? - outcomes.rate(0, keep)?).abs())
}

/// |P(pred = 1 | focal) - P(pred = 1 | rest)|.
pub fn demographic_parity_diff(outcomes: &GroupOutcomes) -> Result<f64> {
    for (g, name) in [(1, "focal"), (0, "comparison")] {
        if !outcomes.group.contains(&g) {
            return Err(Error::EmptyGroup(name.into()));
        }
    }
    Ok(gap(outcomes, |_| true).expect("both groups nonempty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualizedOdds {
    /// Absent when a group has no positive labels.
    pub tpr_diff: Option<f64>,
    /// Absent when a group has no negative labels.
    pub fpr_diff: Option<f64>,
}

/// True- and false-positive-rate gaps. Empty strata give absent values, never zero.
pub fn equalized_odds_diffs(outcomes: &GroupOutcomes) -> EqualizedOdds {
    let tpr_diff = gap(outcomes, |y| y == 1);
    let fpr_diff = gap(outcomes, |y| y == 0);
    if tpr_diff.is_none() {
        warn!("true-positive-rate gap undefined: a group has no positive labels");
    }
    if fpr_diff.is_none() {
        warn!("false-positive-rate gap undefined: a group has no negative labels");
    }
    EqualizedOdds { tpr_diff, fpr_diff }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessSummary {
    pub demographic_parity: Option<f64>,
    pub tpr_diff: Option<f64>,
    pub fpr_diff: Option<f64>,
}

/// All three gaps; an empty group leaves every value absent.
pub fn summarize(outcomes: &GroupOutcomes) -> FairnessSummary {
    match demographic_parity_diff(outcomes) {
        Ok(dp) => {
            let eo = equalized_odds_diffs(outcomes);
            FairnessSummary {
                demographic_parity: Some(dp),
                tpr_diff: eo.tpr_diff,
                fpr_diff: eo.fpr_diff,
            }
        }
        Err(_) => FairnessSummary {
            demographic_parity: None,
            tpr_diff: None,
            fpr_diff: None,
        },
    }
}

/// "0.125 -> 0.250 (x2.00)" style comparison of one metric across conditions.
pub fn render_change(before: f64, after: f64) -> String {
    if before > 0.0 {
        format!("{before:.3} -> {after:.3} (x{:.2})", after / before)
    } else {
        format!("{before:.3} -> {after:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcomes(a: &[u8], y: &[u8], p: &[u8]) -> GroupOutcomes {
        GroupOutcomes::new(a.to_vec(), y.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn parity_by_counting() {
        let o = outcomes(&[1, 1, 1, 1, 0, 0, 0, 0], &[0; 8], &[1, 1, 0, 0, 1, 0, 0, 0]);
        assert_eq!(demographic_parity_diff(&o).unwrap(), 0.25);
        let o = outcomes(&[1, 1, 0, 0], &[0; 4], &[1, 1, 0, 0]);
        assert_eq!(demographic_parity_diff(&o).unwrap(), 1.0);
        let o = outcomes(&[1, 1, 0, 0], &[0; 4], &[1, 0, 0, 1]);
        assert_eq!(demographic_parity_diff(&o).unwrap(), 0.0);
    }

    #[test]
    fn equalized_odds_by_counting() {
        // focal: TP 3/4, FP 1/4; comparison: TP 2/4, FP 2/4
        let a = [1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0];
        let y = [1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1, 0, 0, 0, 0];
        let p = [1, 1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0];
        let eo = equalized_odds_diffs(&outcomes(&a, &y, &p));
        assert_eq!(eo.tpr_diff, Some(0.25));
        assert_eq!(eo.fpr_diff, Some(0.25));
    }

    #[test]
    fn perfect_classifier_has_no_gap() {
        let a = [1, 1, 0, 0];
        let y = [1, 0, 1, 0];
        let eo = equalized_odds_diffs(&outcomes(&a, &y, &y));
        assert_eq!((eo.tpr_diff, eo.fpr_diff), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn empty_strata_are_absent() {
        let eo = equalized_odds_diffs(&outcomes(&[1, 1, 0, 0], &[0, 0, 1, 0], &[1, 0, 1, 0]));
        assert_eq!(eo.tpr_diff, None);
        assert_eq!(eo.fpr_diff, Some(0.5));
        assert!(matches!(
            demographic_parity_diff(&outcomes(&[0, 0], &[0, 1], &[1, 0])),
            Err(Error::EmptyGroup(_))
        ));
    }

    #[test]
    fn fpr_doubling_renders() {
        assert_eq!(render_change(0.125, 0.25), "0.125 -> 0.250 (x2.00)");
    }
}
