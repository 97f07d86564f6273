//! Note text for synthetic pairs. Non-adherent notes carry one sentence built
//! around a phrase the mock extractor recognises.

use rand::Rng;

use crate::cohort::Medication;
use crate::extraction::NonAdherenceType;

const OPENERS: &[&str] = &[
    "Follow-up visit for hypertension.",
    "Seen today for blood pressure follow-up.",
    "Return visit to review blood pressure.",
];

const ADHERENT: &[&str] = &[
    "Taking {med} daily as prescribed.",
    "Reports good adherence to {med}.",
    "Tolerating {med} well.",
];

const MISSED: &[&str] = &[
    "Patient ran out of {med} two weeks ago and did not refill.",
    "She stopped taking {med} last month because of dizziness.",
    "Reports he forgot to take {med} most mornings.",
];

const DOSE: &[&str] = &[
    "Patient took half of the prescribed {med} dose to avoid side effects.",
    "Doubled the dose of {med} on his own when home readings were high.",
];

const MEDICATION: &[&str] = &[
    "Patient switched to an herbal remedy in place of {med}.",
    "Switched to a relative's pills instead of {med}.",
];

const TIMING: &[&str] = &[
    "Takes it at night instead of in the morning as instructed.",
    "Has been taking it at night instead of with breakfast.",
];

const NEGATED: &str = "Patient denies having stopped taking {med}.";
const HOSPITAL: &str = "Restarted {med} after hospitalization last month.";

const CLOSERS: &[&str] = &[
    "Blood pressure reviewed with patient.",
    "Continue current plan and recheck at next visit.",
];

/// Extra content for an adherent note.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdherentVariant {
    Plain,
    NegatedMention,
    HospitalPause,
}

pub struct SynthNote {
    pub text: String,
    /// The non-adherence sentence without its final period, if any.
    pub evidence: Option<String>,
}

fn pick<'a, R: Rng>(rng: &mut R, options: &[&'a str]) -> &'a str {
    options[rng.random_range(0..options.len())]
}

/// Always consumes the same number of draws so that changing the adherence
/// outcome does not shift later draws.
pub fn compose<R: Rng>(
    rng: &mut R,
    med: Medication,
    kind: Option<NonAdherenceType>,
    variant: AdherentVariant,
) -> SynthNote {
    let opener = pick(rng, OPENERS);
    let closer = pick(rng, CLOSERS);
    let adherent = pick(rng, ADHERENT);
    let slot = rng.random_range(0..6u32);
    let fill = |t: &str| t.replace("{med}", med.as_str());

    let (body, evidence) = match kind {
        Some(k) => {
            let options = match k {
                NonAdherenceType::Missed => MISSED,
                NonAdherenceType::DifferentDose => DOSE,
                NonAdherenceType::DifferentMedication => MEDICATION,
                NonAdherenceType::DifferentTiming => TIMING,
            };
            let sentence = fill(options[slot as usize % options.len()]);
            let evidence = sentence.trim_end_matches('.').to_string();
            (sentence, Some(evidence))
        }
        None => {
            let extra = match variant {
                AdherentVariant::Plain => String::new(),
                AdherentVariant::NegatedMention => format!(" {}", fill(NEGATED)),
                AdherentVariant::HospitalPause => format!(" {}", fill(HOSPITAL)),
            };
            (format!("{}{extra}", fill(adherent)), None)
        }
    };
    SynthNote {
        text: format!("{opener} {body} {closer}"),
        evidence,
    }
}
