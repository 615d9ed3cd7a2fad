//! The `kgcot` command: one subcommand per pipeline stage, each reading the
//! previous stage's files and writing its own plus a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use clap::{Parser, Subcommand};
use config::{ClientKind, Overrides, PipelineConfig};
use error::CliError;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "kgcot", version, about = "Knowledge-graph path mining, QA synthesis, CoT curation and GRPO checks")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Largest total path length searched.
    #[arg(long, global = true)]
    pub max_d: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub client: Option<ClientKind>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Edge table or snapshot (overrides graph.path).
    #[arg(long, global = true)]
    pub graph: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Node and edge counts of the graph.
    KgStats(commands::KgStatsArgs),
    /// Reasoning paths for a question or for every item of a QA corpus.
    Mine(commands::MineArgs),
    /// Multiple-choice QA corpus with head-disjoint splits.
    GenQa(commands::GenQaArgs),
    /// Generate and prune reasoning chains for a QA corpus.
    Cot(commands::CotArgs),
    /// Format and answer rewards for model responses.
    Score(commands::ScoreArgs),
    /// Advantages, clipped objective and KL for response groups.
    GrpoEval(commands::GrpoEvalArgs),
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            jobs: self.jobs,
            max_d: self.max_d,
            client: self.client,
            out: self.out.clone(),
            graph: self.graph.clone(),
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = PipelineConfig::load(cli.config.as_deref(), &cli.overrides())?;
    match &cli.command {
        Command::KgStats(a) => commands::cmd_kg_stats(&cfg, a).map(drop),
        Command::Mine(a) => commands::cmd_mine(&cfg, a).map(drop),
        Command::GenQa(a) => commands::cmd_gen_qa(&cfg, a).map(drop),
        Command::Cot(a) => commands::cmd_cot(&cfg, a).map(drop),
        Command::Score(a) => commands::cmd_score(&cfg, a).map(drop),
        Command::GrpoEval(a) => commands::cmd_grpo_eval(&cfg, a).map(drop),
    }
}
