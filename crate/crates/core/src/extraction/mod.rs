//! Adherence labels from prescription and note pairs via a chat-completion
//! backend, with a second self-check round, plus scoring against annotations.

mod backend;
mod http;
mod label;
pub mod mock;
mod pipeline;
mod prompt;
mod scoring;

pub use backend::{call_with_retry, BackendError, ChatBackend, RetryPolicy, ScriptedBackend};
pub use http::{HttpBackend, HttpConfig, DEFAULT_TOKEN_ENV};
pub use label::{AdherenceLabel, LabelSource, NonAdherenceType};
pub use mock::{MockBackend, VerifyMode};
pub use pipeline::{
    apply_labels, extract_adherence, process_request, read_records, requests_from_cohort,
    review_flags, run_extraction, verify_round_two, write_records, ErrorRecord, Extraction,
    ExtractionRecord, ExtractionStatus, PipelineOptions, HOSPITAL_PAUSE_FLAG,
};
pub use prompt::{
    first_round_messages, format_reply, note_from_prompt, parse_reply, render_prompt,
    verification_messages, ChatMessage, ExtractionRequest, ParsedReply, Role, SYSTEM_PROMPT,
    VERIFY_INSTRUCTION,
};
pub use scoring::{score_against_annotations, score_keyed, ValidationMetrics};
