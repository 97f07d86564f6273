use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

categorical!(
    /// How a patient departed from the prescription.
    NonAdherenceType {
        Missed => "missed",
        DifferentDose => "different_dose",
        DifferentMedication => "different_medication",
        DifferentTiming => "different_timing",
    }
);

categorical!(
    /// Who produced a label.
    LabelSource {
        Llm => "llm",
        Mock => "mock",
        Annotation => "annotation",
    }
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdherenceLabel {
    pub non_adherent: bool,
    pub types: BTreeSet<NonAdherenceType>,
    /// Verbatim excerpts of the note supporting the label.
    pub evidence: Vec<String>,
    pub source: LabelSource,
}

impl AdherenceLabel {
    pub fn new(
        non_adherent: bool,
        types: BTreeSet<NonAdherenceType>,
        evidence: Vec<String>,
        source: LabelSource,
    ) -> Result<Self> {
        if !non_adherent && (!types.is_empty() || !evidence.is_empty()) {
            return Err(Error::InvalidInput(
                "an adherent label cannot carry types or evidence".into(),
            ));
        }
        Ok(Self {
            non_adherent,
            types,
            evidence,
            source,
        })
    }

    pub fn adherent(source: LabelSource) -> Self {
        Self {
            non_adherent: false,
            types: BTreeSet::new(),
            evidence: Vec::new(),
            source,
        }
    }

    /// Annotator label with a single type and no excerpts.
    pub fn annotated(kind: NonAdherenceType) -> Self {
        Self {
            non_adherent: true,
            types: BTreeSet::from([kind]),
            evidence: Vec::new(),
            source: LabelSource::Annotation,
        }
    }

    /// First excerpt that does not occur verbatim in `note`, if any.
    pub fn foreign_evidence<'a>(&'a self, note: &str) -> Option<&'a str> {
        self.evidence
            .iter()
            .find(|e| !note.contains(e.as_str()))
            .map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adherent_label_rejects_types() {
        let types = BTreeSet::from([NonAdherenceType::Missed]);
        assert!(AdherenceLabel::new(false, types, vec![], LabelSource::Mock).is_err());
        assert!(AdherenceLabel::new(false, BTreeSet::new(), vec!["x".into()], LabelSource::Mock).is_err());
    }

    #[test]
    fn type_names_round_trip() {
        for t in NonAdherenceType::ALL {
            assert_eq!(t.as_str().parse::<NonAdherenceType>().unwrap(), *t);
        }
        assert_eq!(
            serde_json::to_string(&NonAdherenceType::DifferentDose).unwrap(),
            "\"different_dose\""
        );
    }

    #[test]
    fn foreign_evidence_is_found() {
        let label = AdherenceLabel::new(
            true,
            BTreeSet::from([NonAdherenceType::Missed]),
            vec!["ran out".into(), "never said".into()],
            LabelSource::Mock,
        )
        .unwrap();
        assert_eq!(label.foreign_evidence("she ran out last week"), Some("never said"));
    }
}
