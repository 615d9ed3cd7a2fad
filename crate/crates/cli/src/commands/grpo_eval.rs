use super::{finish, to_json_line, write_output};
use crate::config::PipelineConfig;
use crate::error::{CliError, ExitKind, OrExit};
use crate::manifest::{RunManifest, StageTimer};
use kgcot_core::reward_grpo::{compute_advantages, grpo_gradient_check, grpo_objective, kl_divergence, ToyProblem};
use kgcot_core::{GrpoConfig, PolicyDist, ResponseGroup};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Default, clap::Args)]
pub struct GrpoEvalArgs {
    /// Groups file, one JSON object per line.
    #[arg(long)]
    pub groups: PathBuf,
    /// Also compare the analytic gradient with finite differences at θ = ln π_new.
    #[arg(long)]
    pub grad_check: bool,
}

/// One prompt's sampled group with the three policies over its response alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupInput {
    pub responses: Vec<usize>,
    pub rewards: Vec<f64>,
    pub new: PolicyDist,
    pub old: PolicyDist,
    pub reference: PolicyDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub advantages: Vec<f64>,
    pub objective: f64,
    pub kl: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grad_max_rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrpoReport {
    pub config: GrpoConfig,
    pub groups: Vec<GroupReport>,
    pub mean_objective: f64,
}

pub fn evaluate_group(input: &GroupInput, cfg: &GrpoConfig, grad_check: bool) -> Result<GroupReport, String> {
    let mut group = ResponseGroup::new(input.responses.clone(), input.rewards.clone()).map_err(|e| e.to_string())?;
    let advantages = compute_advantages(&group.rewards, cfg.std_floor).map_err(|e| e.to_string())?;
    group.advantages = Some(advantages.clone());
    let objective = grpo_objective(&group, cfg, &input.new, &input.old, &input.reference).map_err(|e| e.to_string())?;
    let kl = kl_divergence(&input.new, &input.reference).map_err(|e| e.to_string())?;
    let grad_max_rel_error = if grad_check {
        if input.new.probs().iter().any(|&p| p <= 0.0) {
            return Err("gradient check needs a strictly positive new policy".into());
        }
        let theta: Vec<f64> = input.new.probs().iter().map(|p| p.ln()).collect();
        let problem =
            ToyProblem { old: input.old.clone(), reference: input.reference.clone(), group, config: *cfg };
        Some(grpo_gradient_check(&theta, &problem, 1e-5).map_err(|e| e.to_string())?.max_rel_error)
    } else {
        None
    };
    Ok(GroupReport { advantages, objective, kl, grad_max_rel_error })
}

/// Evaluates each group's advantages, objective and KL; writes `<out>/grpo_eval.json`.
pub fn cmd_grpo_eval(cfg: &PipelineConfig, args: &GrpoEvalArgs) -> Result<GrpoReport, CliError> {
    let mut manifest = RunManifest::new("grpo-eval", cfg.hash(), cfg.seed);
    let timer = StageTimer::start("grpo-eval");
    let text = std::fs::read_to_string(&args.groups)
        .map_err(|e| CliError::new(ExitKind::GrpoInput, format!("{}: {e}", args.groups.display())))?;
    let at = |i: usize, msg: String| CliError::new(ExitKind::GrpoInput, format!("{}:{}: {msg}", args.groups.display(), i + 1));
    let mut groups = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let input: GroupInput = serde_json::from_str(line).map_err(|e| at(i, e.to_string()))?;
        groups.push(evaluate_group(&input, &cfg.grpo, args.grad_check).map_err(|e| at(i, e))?);
    }
    if groups.is_empty() {
        return Err(CliError::new(ExitKind::GrpoInput, format!("{}: no groups", args.groups.display())));
    }
    let mean_objective = groups.iter().map(|g| g.objective).sum::<f64>() / groups.len() as f64;
    let report = GrpoReport { config: cfg.grpo, groups, mean_objective };

    let out = cfg.out.join("grpo_eval.json");
    write_output(&out, &to_json_line(&report), ExitKind::GrpoInput)?;
    for (i, g) in report.groups.iter().enumerate() {
        match g.grad_max_rel_error {
            Some(e) => println!("group {i}\tobjective {:.12}\tkl {:.12}\tgrad_rel_err {e:.3e}", g.objective, g.kl),
            None => println!("group {i}\tobjective {:.12}\tkl {:.12}", g.objective, g.kl),
        }
    }
    println!("mean_objective\t{:.12}", report.mean_objective);
    manifest.finish_stage(timer, &[&args.groups], &[&out]).or_exit(ExitKind::GrpoInput)?;
    finish(&manifest, &cfg.out, ExitKind::GrpoInput)?;
    Ok(report)
}
