//! Prompt rendering and the line-oriented reply format.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::label::{AdherenceLabel, LabelSource, NonAdherenceType};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRequest {
    pub pair_id: String,
    pub prescription_text: String,
    pub note_text: String,
}

impl ExtractionRequest {
    pub fn new(
        pair_id: impl Into<String>,
        prescription_text: impl Into<String>,
        note_text: impl Into<String>,
    ) -> Self {
        Self {
            pair_id: pair_id.into(),
            prescription_text: prescription_text.into(),
            note_text: note_text.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prescription_text.trim().is_empty() {
            return Err(Error::InvalidInput(format!("{}: empty prescription", self.pair_id)));
        }
        if self.note_text.trim().is_empty() {
            return Err(Error::InvalidInput(format!("{}: empty note", self.pair_id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

pub const SYSTEM_PROMPT: &str = "You review primary care documentation for hypertension treatment. \
Use only the prescription record and clinical note you are given.";

pub(crate) const NOTE_OPEN: &str = "<<<NOTE\n";
pub(crate) const NOTE_CLOSE: &str = "\nNOTE>>>";

pub const VERIFY_INSTRUCTION: &str = "Double-check your previous answer against the note. \
If it is correct, repeat it. If a non-adherence finding is unsupported, a finding was missed, \
or an excerpt is not copied exactly from the note, give the corrected answer. \
Use exactly the same answer format.";

/// Renders the user turn for one request.
pub fn render_prompt(request: &ExtractionRequest) -> Result<String> {
    request.validate()?;
    let kinds = NonAdherenceType::ALL
        .iter()
        .map(|k| k.as_str())
        .collect::<Vec<_>>()
        .join(", ");
    Ok(format!(
        "Prescription recorded at the first visit:\n\
<<<PRESCRIPTION\n{prescription}\nPRESCRIPTION>>>\n\n\
Clinical note from the follow-up visit:\n\
{NOTE_OPEN}{note}{NOTE_CLOSE}\n\n\
Decide whether the note documents that the patient did not follow the prescription.\n\
If so, name every type of non-adherence that applies, using only these categories: {kinds}.\n\
- missed: doses were missed, the medication was stopped, or it was not filled or refilled.\n\
- different_dose: the patient took a dose other than the one prescribed.\n\
- different_medication: the patient took another medication in place of the prescribed one.\n\
- different_timing: the patient took the medication at a time other than instructed.\n\
Copy each supporting passage from the note exactly, character for character.\n\n\
Answer with these lines and nothing else:\n\
NON_ADHERENT: yes or no\n\
TYPES: comma-separated categories, or none\n\
EVIDENCE: one exact passage per EVIDENCE line, or none\n",
        prescription = request.prescription_text.trim(),
        note = request.note_text,
    ))
}

/// Messages for the first round.
pub fn first_round_messages(request: &ExtractionRequest) -> Result<Vec<ChatMessage>> {
    Ok(vec![
        ChatMessage::system(SYSTEM_PROMPT),
        ChatMessage::user(render_prompt(request)?),
    ])
}

/// Messages asking the model to re-check its own first answer.
pub fn verification_messages(
    request: &ExtractionRequest,
    first_reply: &str,
) -> Result<Vec<ChatMessage>> {
    let mut msgs = first_round_messages(request)?;
    msgs.push(ChatMessage::assistant(first_reply));
    msgs.push(ChatMessage::user(VERIFY_INSTRUCTION));
    Ok(msgs)
}

pub(crate) fn repair_instruction(reason: &str) -> String {
    format!(
        "Your answer could not be read ({reason}). Reply again using only the \
NON_ADHERENT, TYPES and EVIDENCE lines."
    )
}

/// Recovers the note embedded in a rendered prompt.
pub fn note_from_prompt(prompt: &str) -> Option<&str> {
    let start = prompt.find(NOTE_OPEN)? + NOTE_OPEN.len();
    let end = start + prompt[start..].rfind(NOTE_CLOSE)?;
    Some(&prompt[start..end])
}

/// A reply parsed into its fields, before checking it against the note.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedReply {
    pub non_adherent: bool,
    pub types: BTreeSet<NonAdherenceType>,
    pub evidence: Vec<String>,
}

impl ParsedReply {
    pub fn into_label(self, source: LabelSource) -> Result<AdherenceLabel> {
        AdherenceLabel::new(self.non_adherent, self.types, self.evidence, source)
    }
}

fn is_none(s: &str) -> bool {
    s.eq_ignore_ascii_case("none")
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    for (open, close) in [('"', '"'), ('\u{201c}', '\u{201d}')] {
        if s.len() >= 2 && s.starts_with(open) && s.ends_with(close) {
            return &s[open.len_utf8()..s.len() - close.len_utf8()];
        }
    }
    s
}

/// Parses the strict key-value reply. The error string says what was wrong.
pub fn parse_reply(reply: &str) -> std::result::Result<ParsedReply, String> {
    let mut flag: Option<bool> = None;
    let mut types: Option<BTreeSet<NonAdherenceType>> = None;
    let mut evidence: Vec<String> = Vec::new();
    let mut saw_evidence = false;
    let mut evidence_none = false;

    for line in reply.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let Some((key, value)) = line.split_once(':') else {
            return Err(format!("unexpected line '{line}'"));
        };
        let value = value.trim();
        match key.trim().to_ascii_uppercase().as_str() {
            "NON_ADHERENT" => {
                if flag.is_some() {
                    return Err("NON_ADHERENT given twice".into());
                }
                flag = Some(match value.to_ascii_lowercase().as_str() {
                    "yes" | "true" => true,
                    "no" | "false" => false,
                    other => return Err(format!("NON_ADHERENT must be yes or no, got '{other}'")),
                });
            }
            "TYPES" => {
                if types.is_some() {
                    return Err("TYPES given twice".into());
                }
                let mut set = BTreeSet::new();
                if !is_none(value) && !value.is_empty() {
                    for t in value.split(',') {
                        let t = t.trim();
                        set.insert(
                            t.parse::<NonAdherenceType>()
                                .map_err(|_| format!("unknown type '{t}'"))?,
                        );
                    }
                }
                types = Some(set);
            }
            "EVIDENCE" => {
                saw_evidence = true;
                if is_none(value) || value.is_empty() {
                    evidence_none = true;
                } else {
                    evidence.push(strip_quotes(value).to_string());
                }
            }
            other => return Err(format!("unknown key '{other}'")),
        }
    }

    let non_adherent = flag.ok_or("missing NON_ADHERENT line")?;
    let types = types.ok_or("missing TYPES line")?;
    if !saw_evidence {
        return Err("missing EVIDENCE line".into());
    }
    if evidence_none && !evidence.is_empty() {
        return Err("EVIDENCE mixes none with passages".into());
    }
    if non_adherent && (types.is_empty() || evidence.is_empty()) {
        return Err("a yes answer needs at least one type and one passage".into());
    }
    if !non_adherent && (!types.is_empty() || !evidence.is_empty()) {
        return Err("a no answer cannot list types or passages".into());
    }
    Ok(ParsedReply {
        non_adherent,
        types,
        evidence,
    })
}

/// Renders a label in the reply format; `parse_reply` inverts it.
pub fn format_reply(non_adherent: bool, types: &BTreeSet<NonAdherenceType>, evidence: &[String]) -> String {
    let mut out = format!("NON_ADHERENT: {}\n", if non_adherent { "yes" } else { "no" });
    if types.is_empty() {
        out.push_str("TYPES: none\n");
    } else {
        let t: Vec<_> = types.iter().map(|t| t.as_str()).collect();
        out.push_str(&format!("TYPES: {}\n", t.join(", ")));
    }
    if evidence.is_empty() {
        out.push_str("EVIDENCE: none\n");
    } else {
        for e in evidence {
            out.push_str(&format!("EVIDENCE: {e}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(note: &str) -> ExtractionRequest {
        ExtractionRequest::new("p:1:2", "lisinopril 10 mg daily", note)
    }

    #[test]
    fn prompt_contains_note_and_categories() {
        let p = render_prompt(&req("stopped lisinopril")).unwrap();
        assert!(p.contains("stopped lisinopril"));
        assert!(p.contains("lisinopril 10 mg daily"));
        for k in NonAdherenceType::ALL {
            assert!(p.contains(k.as_str()));
        }
        assert_eq!(note_from_prompt(&p), Some("stopped lisinopril"));
    }

    #[test]
    fn prompt_is_deterministic() {
        let r = req("ran out");
        assert_eq!(render_prompt(&r).unwrap(), render_prompt(&r).unwrap());
    }

    #[test]
    fn empty_prescription_rejected() {
        let r = ExtractionRequest::new("x", "  ", "note");
        assert!(render_prompt(&r).is_err());
    }

    #[test]
    fn reply_round_trip() {
        let types = BTreeSet::from([NonAdherenceType::Missed, NonAdherenceType::DifferentTiming]);
        let ev = vec!["ran out of pills".to_string(), "takes it at night instead".to_string()];
        let text = format_reply(true, &types, &ev);
        let parsed = parse_reply(&text).unwrap();
        assert!(parsed.non_adherent);
        assert_eq!(parsed.types, types);
        assert_eq!(parsed.evidence, ev);
        let none = parse_reply(&format_reply(false, &BTreeSet::new(), &[])).unwrap();
        assert!(!none.non_adherent);
    }

    #[test]
    fn malformed_replies_rejected() {
        assert!(parse_reply("The patient is adherent.").is_err());
        assert!(parse_reply("NON_ADHERENT: maybe\nTYPES: none\nEVIDENCE: none").is_err());
        assert!(parse_reply("NON_ADHERENT: yes\nTYPES: forgot\nEVIDENCE: x").is_err());
        assert!(parse_reply("NON_ADHERENT: no\nTYPES: missed\nEVIDENCE: none").is_err());
        assert!(parse_reply("NON_ADHERENT: yes\nTYPES: missed").is_err());
    }

    #[test]
    fn quoted_evidence_is_unwrapped() {
        let p = parse_reply("NON_ADHERENT: yes\nTYPES: missed\nEVIDENCE: \"ran out\"").unwrap();
        assert_eq!(p.evidence, vec!["ran out"]);
    }
}
