use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::backend::{call_with_retry, ChatBackend, RetryPolicy};
use super::label::{AdherenceLabel, LabelSource};
use super::prompt::{
    first_round_messages, format_reply, parse_reply, repair_instruction, verification_messages,
    ChatMessage, ExtractionRequest,
};
use crate::cohort::CohortRecord;
use crate::error::{Error, Result};

/// A label together with every raw reply that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub label: AdherenceLabel,
    pub replies: Vec<String>,
}

enum Rejection {
    Format(String),
    Content(String),
}

fn interpret(reply: &str, request: &ExtractionRequest, source: LabelSource) -> std::result::Result<AdherenceLabel, Rejection> {
    let parsed = parse_reply(reply).map_err(Rejection::Format)?;
    let label = parsed
        .into_label(source)
        .map_err(|e| Rejection::Format(e.to_string()))?;
    if let Some(bad) = label.foreign_evidence(&request.note_text) {
        return Err(Rejection::Content(format!("evidence not found in note: '{bad}'")));
    }
    Ok(label)
}

/// Sends `messages`, allowing one repair turn when the reply is unreadable.
fn converse(
    request: &ExtractionRequest,
    mut messages: Vec<ChatMessage>,
    backend: &dyn ChatBackend,
    policy: &RetryPolicy,
) -> Result<Extraction> {
    let source = backend.source();
    let fail = |reason: String, raw: &str| Error::ExtractionFailed {
        pair_id: request.pair_id.clone(),
        reason,
        raw_reply: raw.to_string(),
    };
    let reply = call_with_retry(backend, &messages, policy)?;
    let reason = match interpret(&reply, request, source) {
        Ok(label) => {
            return Ok(Extraction {
                label,
                replies: vec![reply],
            })
        }
        Err(Rejection::Content(reason)) => return Err(fail(reason, &reply)),
        Err(Rejection::Format(reason)) => reason,
    };
    log::debug!("{}: unreadable reply ({reason}); asking for a repair", request.pair_id);
    messages.push(ChatMessage::assistant(reply.clone()));
    messages.push(ChatMessage::user(repair_instruction(&reason)));
    let repaired = call_with_retry(backend, &messages, policy)?;
    match interpret(&repaired, request, source) {
        Ok(label) => Ok(Extraction {
            label,
            replies: vec![reply, repaired],
        }),
        Err(Rejection::Content(r) | Rejection::Format(r)) => Err(fail(r, &repaired)),
    }
}

/// First round: asks the backend for a label.
pub fn extract_adherence(
    request: &ExtractionRequest,
    backend: &dyn ChatBackend,
    policy: &RetryPolicy,
) -> Result<Extraction> {
    converse(request, first_round_messages(request)?, backend, policy)
}

/// Second round: shows the backend its first answer and asks it to confirm or
/// correct it.
pub fn verify_round_two(
    request: &ExtractionRequest,
    first: &AdherenceLabel,
    backend: &dyn ChatBackend,
    policy: &RetryPolicy,
) -> Result<Extraction> {
    let previous = format_reply(first.non_adherent, &first.types, &first.evidence);
    converse(request, verification_messages(request, &previous)?, backend, policy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Verified,
    /// Verification was switched off; the first-round label is final.
    Unverified,
    /// The second round failed; only the first-round label is available.
    VerificationFailed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

/// Notes that mention resuming medication around a hospital stay. Annotators
/// disagree on whether these are non-adherence, so they are flagged for
/// review rather than resolved.
pub const HOSPITAL_PAUSE_FLAG: &str = "hospitalization_pause";

pub fn review_flags(note: &str) -> Vec<String> {
    let lower = note.to_ascii_lowercase();
    let mut flags = Vec::new();
    if lower.contains("hospital") && (lower.contains("restart") || lower.contains("resum")) {
        flags.push(HOSPITAL_PAUSE_FLAG.to_string());
    }
    flags
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub pair_id: String,
    pub status: ExtractionStatus,
    pub first_label: Option<AdherenceLabel>,
    pub final_label: Option<AdherenceLabel>,
    pub error: Option<ErrorRecord>,
    pub raw_replies: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub review_flags: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineOptions {
    /// Maximum number of requests in flight.
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub verify: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            concurrency: 4,
            retry: RetryPolicy::default(),
            verify: true,
        }
    }
}

fn raw_reply_of(e: &Error) -> Option<String> {
    match e {
        Error::ExtractionFailed { raw_reply, .. } => Some(raw_reply.clone()),
        _ => None,
    }
}

/// Both rounds for one request. Never fails; problems land in the record.
pub fn process_request(
    request: &ExtractionRequest,
    backend: &dyn ChatBackend,
    options: &PipelineOptions,
) -> ExtractionRecord {
    let mut record = ExtractionRecord {
        pair_id: request.pair_id.clone(),
        status: ExtractionStatus::Failed,
        first_label: None,
        final_label: None,
        error: None,
        raw_replies: Vec::new(),
        review_flags: review_flags(&request.note_text),
    };
    let first = match extract_adherence(request, backend, &options.retry) {
        Ok(x) => x,
        Err(e) => {
            record.raw_replies.extend(raw_reply_of(&e));
            record.error = Some((&e).into());
            return record;
        }
    };
    record.raw_replies.extend(first.replies);
    record.first_label = Some(first.label.clone());
    if !options.verify {
        record.status = ExtractionStatus::Unverified;
        record.final_label = Some(first.label);
        return record;
    }
    match verify_round_two(request, &first.label, backend, &options.retry) {
        Ok(second) => {
            record.raw_replies.extend(second.replies);
            record.final_label = Some(second.label);
            record.status = ExtractionStatus::Verified;
        }
        Err(e) => {
            record.raw_replies.extend(raw_reply_of(&e));
            record.error = Some((&e).into());
            record.status = ExtractionStatus::VerificationFailed;
        }
    }
    record
}

/// Runs every request with at most `options.concurrency` in flight. Output
/// order matches input order.
pub fn run_extraction(
    requests: &[ExtractionRequest],
    backend: &dyn ChatBackend,
    options: &PipelineOptions,
) -> Vec<ExtractionRecord> {
    let workers = options.concurrency.clamp(1, requests.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ExtractionRecord>>> = Mutex::new(vec![None; requests.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(req) = requests.get(i) else { break };
                let rec = process_request(req, backend, options);
                slots.lock().unwrap()[i] = Some(rec);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every request is processed"))
        .collect()
}

/// One request per record; the prescription is the first visit's list.
pub fn requests_from_cohort(records: &[CohortRecord]) -> Result<Vec<ExtractionRequest>> {
    records
        .iter()
        .map(|r| {
            let note = r
                .pair
                .second
                .note_text
                .clone()
                .filter(|n| !n.trim().is_empty())
                .ok_or_else(|| Error::MissingValue {
                    pair_id: r.pair_id(),
                    what: "note text",
                })?;
            Ok(ExtractionRequest::new(
                r.pair_id(),
                r.pair.first.prescriptions.join("; "),
                note,
            ))
        })
        .collect()
}

/// Attaches final labels to matching records; returns how many were labelled.
pub fn apply_labels(records: &mut [CohortRecord], results: &[ExtractionRecord]) -> usize {
    let by_id: BTreeMap<&str, &AdherenceLabel> = results
        .iter()
        .filter_map(|r| r.final_label.as_ref().map(|l| (r.pair_id.as_str(), l)))
        .collect();
    let mut n = 0;
    for rec in records.iter_mut() {
        if let Some(label) = by_id.get(rec.pair_id().as_str()) {
            rec.adherence = Some((*label).clone());
            n += 1;
        }
    }
    n
}

pub fn write_records(path: &Path, records: &[ExtractionRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<ExtractionRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
