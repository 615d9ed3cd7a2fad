mod cot;
mod gen_qa;
mod grpo_eval;
mod kg_stats;
mod mine;
mod score;

pub use cot::{cmd_cot, CotArgs};
pub use gen_qa::{cmd_gen_qa, GenQaArgs};
pub use grpo_eval::{cmd_grpo_eval, evaluate_group, GroupInput, GroupReport, GrpoEvalArgs, GrpoReport};
pub use kg_stats::{cmd_kg_stats, KgStatsArgs};
pub use mine::{cmd_mine, MineArgs};
pub use score::{cmd_score, score_texts, ScoreArgs, ScoreReport};

use crate::config::PipelineConfig;
use crate::error::{CliError, ExitKind, OrExit};
use crate::manifest::RunManifest;
use kgcot_core::entity_linker::read_alias_file;
use kgcot_core::kg_store::load_graph;
use kgcot_core::path_engine::PrunePolicy;
use kgcot_core::{Graph, LoadOptions, PathEngine, SearchLimits, TemplateRegistry};
use std::path::{Path, PathBuf};

/// Writes `bytes` atomically, creating parent directories first.
pub(crate) fn write_output(path: &Path, bytes: &[u8], kind: ExitKind) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::new(kind, format!("{}: {e}", dir.display())))?;
    }
    kgcot_core::digest::write_atomic(path, bytes).map_err(|e| CliError::new(kind, format!("{}: {e}", path.display())))
}

pub(crate) fn to_json_line<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

pub(crate) fn open_graph(cfg: &PipelineConfig) -> Result<(Graph, Vec<PathBuf>), CliError> {
    let path = cfg.graph_path()?;
    let options = LoadOptions { delimiter: cfg.graph.delimiter.as_bytes()[0], inverse: cfg.graph.inverse };
    let mut graph = load_graph(path, &options).or_exit(ExitKind::Schema)?;
    let mut inputs = vec![path.to_path_buf()];
    if let Some(aliases) = &cfg.graph.aliases {
        let entries = read_alias_file(aliases, b'\t').or_exit(ExitKind::Schema)?;
        graph = graph.with_aliases(&entries).or_exit(ExitKind::Schema)?;
        inputs.push(aliases.clone());
    }
    Ok((graph, inputs))
}

pub(crate) fn path_engine(cfg: &PipelineConfig) -> Result<PathEngine, CliError> {
    let p = &cfg.paths;
    let registry = match &p.templates {
        Some(path) => TemplateRegistry::load(path).or_exit(ExitKind::Schema)?,
        None => TemplateRegistry::standard(p.max_d, p.max_side),
    };
    Ok(PathEngine::new(
        registry,
        SearchLimits { max_branch_len: p.max_branch_len, max_results: p.max_results },
        PrunePolicy { k: p.prune_k },
    ))
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().or_exit(ExitKind::Schema)
}

pub(crate) fn finish(manifest: &RunManifest, out: &Path, kind: ExitKind) -> Result<(), CliError> {
    let path = RunManifest::path_in(out, &manifest.command);
    std::fs::create_dir_all(out).map_err(|e| CliError::new(kind, format!("{}: {e}", out.display())))?;
    manifest.write(&path).map_err(|e| CliError::new(kind, format!("{}: {e}", path.display())))
}
