use super::finish;
use crate::config::{ClientKind, PipelineConfig};
use crate::error::{CliError, ExitKind, OrExit};
use crate::manifest::{RunManifest, StageTimer};
use kgcot_core::cot_pipeline::{
    default_generation_template, default_pruning_template, export_sft_records, run_batch, BatchOptions, BatchOutcome,
    Clock, FixedClock, HttpClient, MockClient, PromptTemplate, SystemClock, TemplateRole, TextGenClient,
};
use kgcot_core::qa_forge::read_qa_records;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Debug, Clone, Default, clap::Args)]
pub struct CotArgs {
    /// QA corpus (JSONL) to curate chains for.
    #[arg(long)]
    pub corpus: PathBuf,
}

fn template(path: &Option<PathBuf>, role: TemplateRole) -> Result<PromptTemplate, CliError> {
    match (path, role) {
        (Some(p), _) => PromptTemplate::load(p, role).or_exit(ExitKind::Cot),
        (None, TemplateRole::Generation) => Ok(default_generation_template()),
        (None, TemplateRole::Pruning) => Ok(default_pruning_template()),
    }
}

/// Runs generation and pruning over the corpus and exports `<out>/cot/cot.jsonl`.
/// Records that fail are listed on stderr and make the command exit with the
/// CoT status after the successful ones are written.
pub fn cmd_cot(cfg: &PipelineConfig, args: &CotArgs) -> Result<BatchOutcome, CliError> {
    let mut manifest = RunManifest::new("cot", cfg.hash(), cfg.seed);
    let timer = StageTimer::start("cot");
    let items = read_qa_records(&args.corpus).or_exit(ExitKind::Schema)?;
    let generation = template(&cfg.cot.generation_template, TemplateRole::Generation)?;
    let pruning = template(&cfg.cot.pruning_template, TemplateRole::Pruning)?;
    let (client, clock): (Box<dyn TextGenClient>, Box<dyn Clock>) = match cfg.cot.client {
        // Mock runs are pure functions of the input, timestamps included.
        ClientKind::Mock => (Box::new(MockClient::scripted()), Box::new(FixedClock(0))),
        ClientKind::Http => {
            let url = cfg.cot.endpoint.clone().ok_or_else(|| CliError::schema("cot.endpoint is not set"))?;
            let http = HttpClient::new(url, &cfg.cot.token_env, Duration::from_secs(cfg.cot.timeout_secs))
                .with_retry(cfg.cot.retries, Duration::from_millis(200));
            (Box::new(http), Box::new(SystemClock))
        }
    };
    let dir = cfg.out.join("cot");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::new(ExitKind::Cot, format!("{}: {e}", dir.display())))?;
    let checkpoint = cfg.cot.checkpoint.then(|| dir.join("checkpoint.jsonl"));
    let options = BatchOptions { decode: cfg.cot.decode, jobs: cfg.jobs, checkpoint };
    let outcome = run_batch(&items, client.as_ref(), &generation, &pruning, &options, clock.as_ref()).or_exit(ExitKind::Cot)?;

    let out = dir.join("cot.jsonl");
    export_sft_records(&outcome.records, &out).or_exit(ExitKind::Cot)?;
    println!("records\t{}", outcome.records.len());
    println!("resumed\t{}", outcome.resumed);
    println!("failed\t{}", outcome.failures.len());
    for f in &outcome.failures {
        eprintln!("{}: {}", f.item_id, f.error);
    }
    let mut inputs: Vec<&Path> = vec![&args.corpus];
    inputs.extend(cfg.cot.generation_template.as_deref());
    inputs.extend(cfg.cot.pruning_template.as_deref());
    manifest.finish_stage(timer, &inputs, &[&out]).or_exit(ExitKind::Cot)?;
    finish(&manifest, &cfg.out, ExitKind::Cot)?;
    if !outcome.failures.is_empty() {
        return Err(CliError::new(
            ExitKind::Cot,
            format!("{} of {} records failed", outcome.failures.len(), items.len()),
        ));
    }
    Ok(outcome)
}
