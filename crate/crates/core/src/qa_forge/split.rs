use super::{DatasetSplit, QAItem, QaError, TaskCategory};
use crate::kg_store::NodeId;
use crate::path_engine::DifficultyLevel;
use crate::seeding::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Sft,
    Rl,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Sft, SplitName::Rl, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Sft => "sft",
            SplitName::Rl => "rl",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Partitions items so that every head lands in exactly one split. Distinct
/// heads are shuffled under `seed`; each head's group goes to the split whose
/// item count is furthest below its target (ties to the earlier split). Every
/// split ends within one head-group of its target.
pub fn split_by_head(items: Vec<QAItem>, ratios: [f64; 3], seed: u64) -> Result<DatasetSplit, QaError> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(QaError::InvalidRatios(ratios));
    }
    let total = items.len() as f64;
    let mut groups: BTreeMap<NodeId, Vec<QAItem>> = BTreeMap::new();
    for item in items {
        groups.entry(item.head).or_default().push(item);
    }
    let mut heads: Vec<NodeId> = groups.keys().copied().collect();
    heads.shuffle(&mut rng(seed));

    let targets = ratios.map(|r| r * total);
    let mut split = DatasetSplit::default();
    for head in heads {
        let group = groups.remove(&head).expect("head has a group");
        let mut best = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for (i, name) in SplitName::ALL.into_iter().enumerate() {
            let deficit = targets[i] - split.get(name).len() as f64;
            if deficit > best_deficit {
                best = i;
                best_deficit = deficit;
            }
        }
        split.get_mut(SplitName::ALL[best]).extend(group);
    }
    for name in SplitName::ALL {
        split.get_mut(name).sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsCell {
    pub category: TaskCategory,
    pub difficulty: DifficultyLevel,
    pub split: SplitName,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total: usize,
    pub cells: Vec<StatsCell>,
    pub per_split: BTreeMap<SplitName, usize>,
    pub per_category: BTreeMap<TaskCategory, usize>,
    pub per_difficulty: BTreeMap<DifficultyLevel, usize>,
}

/// Counts per category × difficulty × split, with marginals.
pub fn dataset_stats(split: &DatasetSplit) -> DatasetStats {
    let mut cells: BTreeMap<(TaskCategory, DifficultyLevel, SplitName), usize> = BTreeMap::new();
    let mut stats = DatasetStats::default();
    for name in SplitName::ALL {
        stats.per_split.insert(name, split.get(name).len());
        for item in split.get(name) {
            *cells.entry((item.category, item.difficulty, name)).or_default() += 1;
            *stats.per_category.entry(item.category).or_default() += 1;
            *stats.per_difficulty.entry(item.difficulty).or_default() += 1;
            stats.total += 1;
        }
    }
    stats.cells = cells
        .into_iter()
        .map(|((category, difficulty, split), count)| StatsCell { category, difficulty, split, count })
        .collect();
    stats
}
