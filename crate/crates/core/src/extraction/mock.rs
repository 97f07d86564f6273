//! Offline backend driven by a fixed phrase table.
//!
//! Round one flags every sentence containing a trigger phrase. In the
//! verification round the backend either repeats its answer or re-reads the
//! flagged sentences and drops those where the trigger is negated
//! ("denies having stopped taking").

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::backend::{BackendError, ChatBackend};
use super::label::{LabelSource, NonAdherenceType};
use super::prompt::{format_reply, note_from_prompt, parse_reply, ChatMessage, Role, VERIFY_INSTRUCTION};

use NonAdherenceType::*;

/// Trigger phrases (matched case-insensitively) and the type each implies.
pub const MOCK_RULES: &[(&str, NonAdherenceType)] = &[
    ("ran out", Missed),
    ("run out", Missed),
    ("did not refill", Missed),
    ("didn't refill", Missed),
    ("not refilled", Missed),
    ("stopped taking", Missed),
    ("missed doses", Missed),
    ("missed several doses", Missed),
    ("forgot to take", Missed),
    ("took half", DifferentDose),
    ("taking half", DifferentDose),
    ("doubled the dose", DifferentDose),
    ("switched to", DifferentMedication),
    ("takes it at night instead", DifferentTiming),
    ("taking it at night instead", DifferentTiming),
];

/// Words that, appearing before a trigger in the same sentence, negate it.
pub const NEGATION_CUES: &[&str] = &["denies", "denied", "never", "no ", "not "];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// Repeat the first answer unchanged.
    Confirm,
    /// Drop flagged sentences whose trigger is negated.
    #[default]
    Recheck,
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub verify: VerifyMode,
}

impl MockBackend {
    pub fn new(verify: VerifyMode) -> Self {
        Self { verify }
    }
}

/// Sentence slices of `text`, trimmed, in order.
fn sentences(text: &str) -> Vec<&str> {
    text.split(['.', '!', '?', '\n', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

/// Types triggered in one sentence, honouring negation when asked.
fn sentence_types(sentence: &str, honour_negation: bool) -> BTreeSet<NonAdherenceType> {
    let lower = sentence.to_ascii_lowercase();
    let mut out = BTreeSet::new();
    for &(phrase, kind) in MOCK_RULES {
        if let Some(pos) = lower.find(phrase) {
            let before = &lower[..pos];
            if honour_negation && NEGATION_CUES.iter().any(|c| before.contains(c)) {
                continue;
            }
            out.insert(kind);
        }
    }
    out
}

fn answer(excerpts: &[&str], honour_negation: bool) -> String {
    let mut types = BTreeSet::new();
    let mut evidence = Vec::new();
    for s in excerpts {
        let t = sentence_types(s, honour_negation);
        if !t.is_empty() {
            types.extend(t);
            if !evidence.iter().any(|e: &String| e == s) {
                evidence.push(s.to_string());
            }
        }
    }
    format_reply(!types.is_empty(), &types, &evidence)
}

/// First-round answer for a note.
pub fn mock_label_reply(note: &str) -> String {
    answer(&sentences(note), false)
}

impl ChatBackend for MockBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let note = messages
            .iter()
            .filter(|m| m.role == Role::User)
            .find_map(|m| note_from_prompt(&m.content))
            .ok_or_else(|| BackendError::Fatal("no note in request".into()))?;

        let verifying = messages
            .last()
            .is_some_and(|m| m.role == Role::User && m.content == VERIFY_INSTRUCTION);
        if !verifying {
            return Ok(mock_label_reply(note));
        }
        let previous = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::Assistant)
            .map(|m| m.content.as_str())
            .unwrap_or_default();
        match (self.verify, parse_reply(previous)) {
            (VerifyMode::Confirm, Ok(_)) => Ok(previous.to_string()),
            (VerifyMode::Recheck, Ok(p)) => {
                let ev: Vec<&str> = p.evidence.iter().map(String::as_str).collect();
                Ok(answer(&ev, true))
            }
            (_, Err(_)) => Ok(answer(&sentences(note), true)),
        }
    }

    fn source(&self) -> LabelSource {
        LabelSource::Mock
    }
}
