use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::label::AdherenceLabel;
use crate::error::{Error, Result};

/// Confusion counts with non-adherence as the positive class. Ratios with a
/// zero denominator are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationMetrics {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ValidationMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Self {
            tp,
            fp,
            fn_,
            tn,
            accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        }
    }
}

/// Scores index-aligned predictions against gold labels.
pub fn score_against_annotations(
    predicted: &[AdherenceLabel],
    gold: &[AdherenceLabel],
) -> Result<ValidationMetrics> {
    if predicted.len() != gold.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: gold.len(),
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (p, g) in predicted.iter().zip(gold) {
        match (p.non_adherent, g.non_adherent) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(ValidationMetrics::from_counts(tp, fp, fn_, tn))
}

/// Scores predictions and gold labels keyed by pair id; the key sets must agree.
pub fn score_keyed(
    predicted: &BTreeMap<String, AdherenceLabel>,
    gold: &BTreeMap<String, AdherenceLabel>,
) -> Result<ValidationMetrics> {
    if let Some(k) = gold.keys().find(|k| !predicted.contains_key(*k)) {
        return Err(Error::MissingLabel { pair_id: k.clone() });
    }
    if let Some(k) = predicted.keys().find(|k| !gold.contains_key(*k)) {
        return Err(Error::MissingLabel { pair_id: k.clone() });
    }
    let p: Vec<_> = predicted.values().cloned().collect();
    let g: Vec<_> = gold.values().cloned().collect();
    score_against_annotations(&p, &g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::{LabelSource, NonAdherenceType};

    fn labels(flags: &[bool]) -> Vec<AdherenceLabel> {
        flags
            .iter()
            .map(|&f| {
                if f {
                    AdherenceLabel::annotated(NonAdherenceType::Missed)
                } else {
                    AdherenceLabel::adherent(LabelSource::Annotation)
                }
            })
            .collect()
    }

    #[test]
    fn ninety_two_percent() {
        let m = ValidationMetrics::from_counts(46, 4, 4, 46);
        assert!((m.accuracy.unwrap() - 0.92).abs() < 1e-12);
        assert!((m.precision.unwrap() - 0.92).abs() < 1e-12);
        assert!((m.recall.unwrap() - 0.92).abs() < 1e-12);
    }

    #[test]
    fn all_adherent_predictions() {
        let gold = labels(&[[true; 25], [false; 25]].concat());
        let pred = labels(&[false; 50]);
        let m = score_against_annotations(&pred, &gold).unwrap();
        assert_eq!(m.accuracy, Some(0.5));
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.precision, None);
    }

    #[test]
    fn length_mismatch() {
        assert!(score_against_annotations(&labels(&[true]), &labels(&[])).is_err());
    }

    #[test]
    fn serialises_fn_key() {
        let s = serde_json::to_string(&ValidationMetrics::from_counts(1, 0, 0, 0)).unwrap();
        assert!(s.contains("\"fn\":0"));
    }
}
