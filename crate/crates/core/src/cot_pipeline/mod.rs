//! Chain-of-thought curation: a generation prompt built from the question, its
//! answer and mined paths; a text-generation call; a pruning prompt over the
//! raw chain; a second call; and export of the pruned records.

mod batch;
mod client;
mod template;

pub use batch::{run_batch, BatchOptions, BatchOutcome, Clock, FixedClock, RecordFailure, SystemClock};
pub use client::{chain_of, ClientError, DecodeOptions, HttpClient, MockBehavior, MockClient, TextGenClient, ASIDE_TAG};
pub use template::{
    default_generation_template, default_pruning_template, PromptTemplate, TemplateRole, CHAIN_CLOSE, CHAIN_OPEN,
};

use crate::digest::write_atomic;
use crate::qa_forge::QaRecord;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Substituted for `{paths}` when an item has no mined path.
pub const NO_PATHS: &str = "(no knowledge graph paths were found for this question)";

#[derive(Debug, Error)]
pub enum CotError {
    #[error("template error: {0}")]
    Template(String),
    #[error("{stage} call returned an empty completion")]
    EmptyCompletion { stage: &'static str },
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("record {0} is incomplete")]
    Incomplete(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub client: String,
    pub decode: DecodeOptions,
    pub started_ms: u64,
    pub finished_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoTRecord {
    pub item_id: String,
    pub question: String,
    pub answer: String,
    pub paths_text: String,
    pub chain_raw: String,
    pub chain_pruned: String,
    pub provenance: Provenance,
}

impl CoTRecord {
    pub fn is_complete(&self) -> bool {
        !self.chain_pruned.trim().is_empty() && !self.provenance.client.is_empty()
    }
}

pub fn paths_text(record: &QaRecord) -> String {
    if record.paths.is_empty() {
        NO_PATHS.to_string()
    } else {
        record.paths.join("\n")
    }
}

fn options_text(record: &QaRecord) -> String {
    record
        .options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {o}", (b'A' + i as u8) as char))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn build_generation_prompt(record: &QaRecord, template: &PromptTemplate) -> Result<String, CotError> {
    template.expect_role(TemplateRole::Generation)?;
    let paths = paths_text(record);
    let options = options_text(record);
    template.render(&[
        ("question", &record.question),
        ("answer", record.answer()),
        ("paths", &paths),
        ("options", &options),
    ])
}

pub fn build_pruning_prompt(question: &str, chain: &str, template: &PromptTemplate) -> Result<String, CotError> {
    template.expect_role(TemplateRole::Pruning)?;
    if chain.trim().is_empty() {
        return Err(CotError::Template("empty chain: nothing to prune".into()));
    }
    template.render(&[("question", question), ("chain", chain)])
}

fn call(client: &dyn TextGenClient, prompt: &str, options: &DecodeOptions, stage: &'static str) -> Result<String, CotError> {
    let text = client.complete(prompt, options)?;
    if text.trim().is_empty() {
        return Err(CotError::EmptyCompletion { stage });
    }
    Ok(text)
}

/// Raw chain `C` for a generation prompt.
pub fn generate_cot(client: &dyn TextGenClient, prompt: &str, options: &DecodeOptions) -> Result<String, CotError> {
    call(client, prompt, options, "generation")
}

/// Pruned chain for a pruning prompt.
pub fn prune_cot(client: &dyn TextGenClient, prompt: &str, options: &DecodeOptions) -> Result<String, CotError> {
    call(client, prompt, options, "pruning")
}

/// One JSON object per line; newlines inside fields are escaped.
pub fn records_to_jsonl(records: &[CoTRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    out
}

/// Writes all records or nothing; returns the number of lines written.
pub fn export_sft_records(records: &[CoTRecord], destination: &Path) -> Result<usize, CotError> {
    if let Some(bad) = records.iter().find(|r| !r.is_complete()) {
        return Err(CotError::Incomplete(bad.item_id.clone()));
    }
    write_atomic(destination, &records_to_jsonl(records))
        .map_err(|e| CotError::Io { path: destination.display().to_string(), message: e.to_string() })?;
    Ok(records.len())
}

pub fn read_sft_records(path: &Path) -> Result<Vec<CoTRecord>, CotError> {
    let err = |message: String| CotError::Io { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| err(format!("line {}: {e}", i + 1))))
        .collect()
}
