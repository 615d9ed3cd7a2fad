//! Verifiable rewards for tagged responses and group-relative policy
//! optimisation numerics.
//!
//! A response is well formed when it is exactly one `<think>…</think>` block
//! followed by exactly one `<answer>…</answer>` block, with only whitespace
//! around and between them. Format earns 1 and a correct answer earns 5; the
//! two are scored independently and summed.

mod grpo;
mod toy;

pub use grpo::{
    clipped_term, compute_advantages, grpo_objective, kl_divergence, mean_objective, probability_ratio, GrpoConfig,
    GrpoError, PolicyDist, ResponseGroup,
};
pub use toy::{grpo_gradient_check, sample_group, GradientCheck, ToyProblem};

use crate::entity_linker::normalize;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

pub const FORMAT_REWARD: u8 = 1;
pub const ANSWER_REWARD: u8 = 5;

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format: u8,
    pub answer: u8,
    pub total: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnswerMode {
    /// Option letter, compared after trimming and uppercasing.
    #[default]
    Letter,
    /// Entity name, compared after name normalization.
    Name,
}

impl FromStr for AnswerMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "letter" => Ok(AnswerMode::Letter),
            "name" => Ok(AnswerMode::Name),
            other => Err(format!("unknown answer mode {other:?} (expected letter or name)")),
        }
    }
}

/// Position of the single occurrence of `tag`, or `None` if it occurs zero or
/// several times.
fn unique(text: &str, tag: &str) -> Option<usize> {
    let mut it = text.match_indices(tag);
    let first = it.next()?.0;
    it.next().is_none().then_some(first)
}

fn blank(s: &str) -> bool {
    s.chars().all(char::is_whitespace)
}

/// 1 iff the text is one think block followed by one answer block.
pub fn check_format(text: &str) -> u8 {
    let tags = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE].map(|t| unique(text, t));
    let [Some(to), Some(tc), Some(ao), Some(ac)] = tags else {
        return 0;
    };
    let ordered = to < tc && tc < ao && ao < ac;
    let ok = ordered
        && blank(&text[..to])
        && blank(&text[tc + THINK_CLOSE.len()..ao])
        && blank(&text[ac + ANSWER_CLOSE.len()..]);
    u8::from(ok)
}

/// Content of the single `<answer>` block, if there is exactly one.
pub fn extract_answer(text: &str) -> Option<&str> {
    let open = unique(text, ANSWER_OPEN)?;
    let close = unique(text, ANSWER_CLOSE)?;
    let start = open + ANSWER_OPEN.len();
    (start <= close).then(|| &text[start..close])
}

/// 5 iff the answer block matches `gold` under `mode`. An empty gold never matches.
pub fn score_answer(text: &str, gold: &str, mode: AnswerMode) -> u8 {
    let Some(content) = extract_answer(text) else {
        return 0;
    };
    let hit = match mode {
        AnswerMode::Letter => {
            let g = gold.trim().to_uppercase();
            !g.is_empty() && content.trim().to_uppercase() == g
        }
        AnswerMode::Name => {
            let g = normalize(gold);
            !g.is_empty() && normalize(content) == g
        }
    };
    if hit {
        ANSWER_REWARD
    } else {
        0
    }
}

pub fn total_reward(text: &str, gold: &str, mode: AnswerMode) -> RewardBreakdown {
    let format = check_format(text) * FORMAT_REWARD;
    let answer = score_answer(text, gold, mode);
    RewardBreakdown { format, answer, total: format + answer }
}
