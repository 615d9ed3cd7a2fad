use super::{
    build_generation_prompt, build_pruning_prompt, generate_cot, prune_cot, paths_text, CoTRecord, CotError, DecodeOptions,
    PromptTemplate, Provenance, TextGenClient,
};
use crate::qa_forge::QaRecord;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// Always reports the same instant, so mock runs export identical bytes.
pub struct FixedClock(pub u64);

impl Clock for FixedClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    pub decode: DecodeOptions,
    /// Concurrent client calls; 0 means one.
    pub jobs: usize,
    /// Completed records are appended here and skipped on a rerun.
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordFailure {
    pub item_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    /// Completed records in item id order.
    pub records: Vec<CoTRecord>,
    pub failures: Vec<RecordFailure>,
    pub resumed: usize,
}

fn process(
    item: &QaRecord,
    client: &dyn TextGenClient,
    generation: &PromptTemplate,
    pruning: &PromptTemplate,
    decode: &DecodeOptions,
    clock: &dyn Clock,
) -> Result<CoTRecord, CotError> {
    let started_ms = clock.now_ms();
    let prompt = build_generation_prompt(item, generation)?;
    let chain_raw = generate_cot(client, &prompt, decode)?;
    let chain_pruned = prune_cot(client, &build_pruning_prompt(&item.question, &chain_raw, pruning)?, decode)?;
    Ok(CoTRecord {
        item_id: item.id.clone(),
        question: item.question.clone(),
        answer: item.answer().to_string(),
        paths_text: paths_text(item),
        chain_raw,
        chain_pruned,
        provenance: Provenance { client: client.name(), decode: *decode, started_ms, finished_ms: clock.now_ms() },
    })
}

fn load_checkpoint(path: &Path) -> Result<BTreeMap<String, CoTRecord>, CotError> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    Ok(super::read_sft_records(path)?.into_iter().filter(|r| r.is_complete()).map(|r| (r.item_id.clone(), r)).collect())
}

/// Runs generation and pruning for every item. Prompts are built for all
/// items before the first call, so a template problem fails the whole batch
/// up front; client failures only fail their own record.
pub fn run_batch(
    items: &[QaRecord],
    client: &dyn TextGenClient,
    generation: &PromptTemplate,
    pruning: &PromptTemplate,
    options: &BatchOptions,
    clock: &dyn Clock,
) -> Result<BatchOutcome, CotError> {
    for item in items {
        build_generation_prompt(item, generation)?;
    }
    pruning.expect_role(super::TemplateRole::Pruning)?;

    let io_err = |p: &Path, e: std::io::Error| CotError::Io { path: p.display().to_string(), message: e.to_string() };
    let mut done = match &options.checkpoint {
        Some(p) => load_checkpoint(p)?,
        None => BTreeMap::new(),
    };
    let resumed = items.iter().filter(|i| done.contains_key(&i.id)).count();
    let writer = match &options.checkpoint {
        Some(p) => Some(Mutex::new(
            std::fs::OpenOptions::new().create(true).append(true).open(p).map_err(|e| io_err(p, e))?,
        )),
        None => None,
    };
    let pending: Vec<&QaRecord> = items.iter().filter(|i| !done.contains_key(&i.id)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| CotError::Io { path: "<thread pool>".into(), message: e.to_string() })?;
    let results: Vec<(String, Result<CoTRecord, CotError>)> = pool.install(|| {
        pending
            .par_iter()
            .map(|item| {
                let res = process(item, client, generation, pruning, &options.decode, clock);
                if let (Ok(rec), Some(w)) = (&res, &writer) {
                    let mut line = serde_json::to_vec(rec).expect("record serializes");
                    line.push(b'\n');
                    let mut f = w.lock().unwrap_or_else(|e| e.into_inner());
                    if let Err(e) = f.write_all(&line).and_then(|_| f.flush()) {
                        log::warn!("checkpoint write failed for {}: {e}", rec.item_id);
                    }
                }
                (item.id.clone(), res)
            })
            .collect()
    });

    let mut failures = Vec::new();
    for (id, res) in results {
        match res {
            Ok(rec) => {
                done.insert(id, rec);
            }
            Err(e) => failures.push(RecordFailure { item_id: id, error: e.to_string() }),
        }
    }
    failures.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    let wanted: std::collections::BTreeSet<&str> = items.iter().map(|i| i.id.as_str()).collect();
    let records = done.into_values().filter(|r| wanted.contains(r.item_id.as_str())).collect();
    Ok(BatchOutcome { records, failures, resumed })
}
