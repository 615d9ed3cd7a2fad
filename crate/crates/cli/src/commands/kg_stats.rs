use super::{finish, open_graph, to_json_line, write_output};
use crate::config::PipelineConfig;
use crate::error::{CliError, ExitKind, OrExit};
use crate::manifest::{RunManifest, StageTimer};
use kgcot_core::kg_store::write_snapshot;
use kgcot_core::GraphStats;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, clap::Args)]
pub struct KgStatsArgs {
    /// Also save the loaded graph (aliases included) as a snapshot for faster reloads.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

/// Loads the graph, prints its statistics as JSON and writes `<out>/kg_stats.json`.
pub fn cmd_kg_stats(cfg: &PipelineConfig, args: &KgStatsArgs) -> Result<GraphStats, CliError> {
    let mut manifest = RunManifest::new("kg-stats", cfg.hash(), cfg.seed);
    let timer = StageTimer::start("load");
    let (graph, inputs) = open_graph(cfg)?;
    let stats = graph.stats();
    let out = cfg.out.join("kg_stats.json");
    let bytes = to_json_line(&stats);
    write_output(&out, &bytes, ExitKind::Schema)?;
    let mut outputs = vec![out.as_path()];
    if let Some(path) = &args.snapshot {
        let mut buf = Vec::new();
        write_snapshot(&graph, &mut buf).or_exit(ExitKind::Schema)?;
        write_output(path, &buf, ExitKind::Schema)?;
        outputs.push(path);
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    let ins: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    manifest.finish_stage(timer, &ins, &outputs).or_exit(ExitKind::Schema)?;
    finish(&manifest, &cfg.out, ExitKind::Schema)?;
    Ok(stats)
}
