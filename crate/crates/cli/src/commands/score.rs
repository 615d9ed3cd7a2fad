use super::{finish, to_json_line, write_output};
use crate::config::PipelineConfig;
use crate::error::{CliError, ExitKind, OrExit};
use crate::manifest::{RunManifest, StageTimer};
use kgcot_core::reward_grpo::{total_reward, AnswerMode};
use kgcot_core::RewardBreakdown;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Default, clap::Args)]
pub struct ScoreArgs {
    /// Model responses, one JSON string (or object with a `text` field) per line.
    #[arg(long)]
    pub responses: PathBuf,
    /// Gold answers, one per line.
    #[arg(long)]
    pub gold: PathBuf,
    /// `letter` or `name` (overrides score.answer_mode).
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ResponseLine {
    Text(String),
    Object { text: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub count: usize,
    /// Fraction of responses whose answer block matches the gold answer.
    pub accuracy: f64,
    pub mean_reward: f64,
    pub breakdowns: Vec<RewardBreakdown>,
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(ExitKind::Scoring, format!("{}: {e}", path.display())))
}

pub fn score_texts(responses: &[String], gold: &[String], mode: AnswerMode) -> Result<ScoreReport, CliError> {
    if responses.len() != gold.len() {
        return Err(CliError::new(
            ExitKind::Scoring,
            format!("{} responses but {} gold answers", responses.len(), gold.len()),
        ));
    }
    let breakdowns: Vec<RewardBreakdown> = responses.iter().zip(gold).map(|(r, g)| total_reward(r, g, mode)).collect();
    let n = breakdowns.len();
    let (accuracy, mean_reward) = if n == 0 {
        (0.0, 0.0)
    } else {
        let correct = breakdowns.iter().filter(|b| b.answer > 0).count();
        let total: u32 = breakdowns.iter().map(|b| b.total as u32).sum();
        (correct as f64 / n as f64, total as f64 / n as f64)
    };
    Ok(ScoreReport { count: n, accuracy, mean_reward, breakdowns })
}

/// Scores aligned response/gold files and writes `<out>/score.json`.
pub fn cmd_score(cfg: &PipelineConfig, args: &ScoreArgs) -> Result<ScoreReport, CliError> {
    let mut manifest = RunManifest::new("score", cfg.hash(), cfg.seed);
    let timer = StageTimer::start("score");
    let mode: AnswerMode = match &args.mode {
        Some(m) => m.parse().map_err(CliError::schema)?,
        None => cfg.answer_mode()?,
    };
    let responses = read(&args.responses)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| match serde_json::from_str::<ResponseLine>(l) {
            Ok(ResponseLine::Text(t) | ResponseLine::Object { text: t }) => Ok(t),
            Err(e) => Err(CliError::new(ExitKind::Scoring, format!("{}:{}: {e}", args.responses.display(), i + 1))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let gold: Vec<String> = read(&args.gold)?.lines().map(str::to_string).collect();
    let report = score_texts(&responses, &gold, mode)?;

    let out = cfg.out.join("score.json");
    write_output(&out, &to_json_line(&report), ExitKind::Scoring)?;
    println!("count\t{}", report.count);
    println!("accuracy\t{:.4}", report.accuracy);
    println!("mean_reward\t{:.4}", report.mean_reward);
    manifest.finish_stage(timer, &[&args.responses, &args.gold], &[&out]).or_exit(ExitKind::Scoring)?;
    finish(&manifest, &cfg.out, ExitKind::Scoring)?;
    Ok(report)
}
