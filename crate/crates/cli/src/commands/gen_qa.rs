use super::{finish, open_graph, path_engine, thread_pool, to_json_line, write_output};
use crate::config::PipelineConfig;
use crate::error::{CliError, ExitKind, OrExit};
use crate::manifest::{RunManifest, StageTimer};
use kgcot_core::qa_forge::{
    attach_paths_and_difficulty, dataset_stats, default_category_specs, generate_qa, load_category_specs,
    records_to_jsonl, split_by_head, AttachOptions, DatasetStats, QaError, SplitName,
};
use kgcot_core::QAItem;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, clap::Args)]
pub struct GenQaArgs {
    /// Items per category (overrides qa.count_per_category).
    #[arg(long)]
    pub count: Option<usize>,
}

fn qa_exit(e: QaError) -> CliError {
    match e {
        QaError::Config { .. } | QaError::InvalidSpec(_) | QaError::InvalidRatios(_) => CliError::schema(e),
        other => CliError::new(ExitKind::Generation, other),
    }
}

/// Generates every category, mines paths and difficulty, splits by head and
/// writes `<out>/qa/{corpus,sft,rl,test}.jsonl` plus `stats.json`.
pub fn cmd_gen_qa(cfg: &PipelineConfig, args: &GenQaArgs) -> Result<DatasetStats, CliError> {
    let mut manifest = RunManifest::new("gen-qa", cfg.hash(), cfg.seed);
    let (graph, mut inputs) = open_graph(cfg)?;
    let specs = match &cfg.qa.categories {
        Some(p) => {
            inputs.push(p.clone());
            load_category_specs(p).map_err(qa_exit)?
        }
        None => default_category_specs(),
    };
    let count = args.count.unwrap_or(cfg.qa.count_per_category);
    let pool = thread_pool(cfg.jobs)?;

    let timer = StageTimer::start("generate");
    let mut items: Vec<QAItem> = Vec::new();
    for spec in &specs {
        let outcome = pool.install(|| generate_qa(&graph, spec, count, cfg.seed)).map_err(qa_exit)?;
        if outcome.eligible_triples > 0 {
            let dropped = outcome.skipped_insufficient as f64 / outcome.eligible_triples as f64;
            if dropped > cfg.qa.shortfall_tolerance {
                return Err(CliError::new(
                    ExitKind::Generation,
                    format!(
                        "{}: {} of {} eligible triples lack three distractors (tolerance {})",
                        spec.name, outcome.skipped_insufficient, outcome.eligible_triples, cfg.qa.shortfall_tolerance
                    ),
                ));
            }
        }
        if outcome.shortfall {
            log::info!("{}: {} of {} requested items", spec.name, outcome.items.len(), count);
        }
        items.extend(outcome.items);
    }
    let engine = path_engine(cfg)?;
    let attach = AttachOptions { exclude_direct_edge: cfg.qa.exclude_direct_edge };
    let items = pool
        .install(|| attach_paths_and_difficulty(items, &graph, &specs, &engine, cfg.paths.max_d, &attach))
        .map_err(qa_exit)?;
    let split = split_by_head(items, cfg.qa.ratios, cfg.seed).map_err(qa_exit)?;
    let stats = dataset_stats(&split);

    let dir = cfg.out.join("qa");
    let mut outputs: Vec<PathBuf> = Vec::new();
    let mut all = Vec::new();
    for name in SplitName::ALL {
        let records: Vec<_> = split.get(name).iter().map(|i| i.to_record(&graph)).collect();
        let path = dir.join(format!("{name}.jsonl"));
        write_output(&path, &records_to_jsonl(&records), ExitKind::Generation)?;
        outputs.push(path);
        all.extend(records);
    }
    all.sort_by(|a, b| a.id.cmp(&b.id));
    let corpus = dir.join("corpus.jsonl");
    write_output(&corpus, &records_to_jsonl(&all), ExitKind::Generation)?;
    let stats_path = dir.join("stats.json");
    write_output(&stats_path, &to_json_line(&stats), ExitKind::Generation)?;
    outputs.push(corpus);
    outputs.push(stats_path);

    for name in SplitName::ALL {
        println!("{name}\t{}", stats.per_split.get(&name).copied().unwrap_or(0));
    }
    for (level, n) in &stats.per_difficulty {
        println!("{level}\t{n}");
    }
    println!("total\t{}", stats.total);

    let ins: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    let outs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    manifest.finish_stage(timer, &ins, &outs).or_exit(ExitKind::Generation)?;
    finish(&manifest, &cfg.out, ExitKind::Generation)?;
    Ok(stats)
}
