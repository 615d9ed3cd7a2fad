//! Head–relation multiple-choice question synthesis, difficulty labelling and
//! head-disjoint dataset splits.

mod generate;
mod split;

pub use generate::{attach_paths_and_difficulty, generate_qa, sample_distractors, AttachOptions, GenerateOutcome};
pub use split::{dataset_stats, split_by_head, DatasetStats, SplitName, StatsCell};

use crate::digest;
use crate::kg_store::{Graph, NodeId};
use crate::path_engine::{serialize_path, DifficultyLevel, PathError, ReasoningPath};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QaError {
    #[error("relation {0:?} does not occur in the graph")]
    UnknownRelation(String),
    #[error("invalid category spec: {0}")]
    InvalidSpec(String),
    #[error("({head}, {relation}, {answer}): only {available} eligible distractor(s), need 3")]
    InsufficientDistractors { head: String, relation: String, answer: String, available: usize },
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskCategory {
    Indication,
    Bioprocess,
    OffLabelUse,
    DiseaseProtein,
    SideEffect,
    Contraindication,
    DrugDrugInteraction,
}

impl TaskCategory {
    pub const ALL: [TaskCategory; 7] = [
        TaskCategory::Indication,
        TaskCategory::Bioprocess,
        TaskCategory::OffLabelUse,
        TaskCategory::DiseaseProtein,
        TaskCategory::SideEffect,
        TaskCategory::Contraindication,
        TaskCategory::DrugDrugInteraction,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            TaskCategory::Indication => "indication",
            TaskCategory::Bioprocess => "bioprocess",
            TaskCategory::OffLabelUse => "off_label_use",
            TaskCategory::DiseaseProtein => "disease_protein",
            TaskCategory::SideEffect => "side_effect",
            TaskCategory::Contraindication => "contraindication",
            TaskCategory::DrugDrugInteraction => "drug_drug_interaction",
        }
    }

    fn index(self) -> u64 {
        Self::ALL.iter().position(|&c| c == self).unwrap() as u64
    }
}

impl fmt::Display for TaskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for TaskCategory {
    type Err = QaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.slug() == s)
            .ok_or_else(|| QaError::InvalidSpec(format!("unknown task category {s:?}")))
    }
}

const HEAD_PLACEHOLDER: &str = "{head}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategorySpec {
    pub name: TaskCategory,
    pub head_type: String,
    pub relation: String,
    pub answer_type: String,
    pub question_template: String,
    pub difficulty_hint: DifficultyLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_per_head: Option<usize>,
}

impl CategorySpec {
    pub fn validate(&self) -> Result<(), QaError> {
        let n = self.question_template.matches(HEAD_PLACEHOLDER).count();
        if n != 1 {
            return Err(QaError::InvalidSpec(format!(
                "{}: question template must contain exactly one {HEAD_PLACEHOLDER}, found {n}",
                self.name
            )));
        }
        if self.max_per_head == Some(0) {
            return Err(QaError::InvalidSpec(format!("{}: max_per_head must be positive", self.name)));
        }
        Ok(())
    }

    pub fn render_question(&self, head_name: &str) -> String {
        self.question_template.replacen(HEAD_PLACEHOLDER, head_name, 1)
    }

    /// Digest of the canonical JSON form, recorded in corpus manifests.
    pub fn digest(&self) -> String {
        digest::sha256_hex(serde_json::to_vec(self).expect("spec serializes"))
    }
}

#[derive(Deserialize)]
struct SpecFile {
    category: Vec<CategorySpec>,
}

const DEFAULT_SPECS: &str = include_str!("../../assets/categories.toml");

pub fn parse_category_specs(text: &str) -> Result<Vec<CategorySpec>, QaError> {
    let file: SpecFile = toml::from_str(text).map_err(|e| QaError::InvalidSpec(e.to_string()))?;
    for spec in &file.category {
        spec.validate()?;
    }
    Ok(file.category)
}

/// The seven shipped categories.
pub fn default_category_specs() -> Vec<CategorySpec> {
    parse_category_specs(DEFAULT_SPECS).expect("bundled category file is valid")
}

pub fn load_category_specs(path: &Path) -> Result<Vec<CategorySpec>, QaError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| QaError::Config { path: path.display().to_string(), message: e.to_string() })?;
    parse_category_specs(&text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QAItem {
    pub id: String,
    pub question: String,
    pub options: [String; 4],
    pub correct_index: usize,
    pub head: NodeId,
    pub relation: String,
    pub answer: NodeId,
    pub category: TaskCategory,
    pub difficulty: DifficultyLevel,
    pub paths: Vec<ReasoningPath>,
    /// No admissible path was found within the complexity budget.
    pub unmined: bool,
}

impl QAItem {
    pub fn correct_option(&self) -> &str {
        &self.options[self.correct_index]
    }

    pub fn letter(&self) -> char {
        (b'A' + self.correct_index as u8) as char
    }

    pub fn to_record(&self, graph: &Graph) -> QaRecord {
        let node = |id: NodeId| graph.node(id).expect("item nodes come from the graph");
        let (head, answer) = (node(self.head), node(self.answer));
        QaRecord {
            id: self.id.clone(),
            question: self.question.clone(),
            options: self.options.clone(),
            correct_index: self.correct_index,
            head_key: head.key.clone(),
            head_name: head.name.clone(),
            answer_key: answer.key.clone(),
            answer_name: answer.name.clone(),
            relation: self.relation.clone(),
            category: self.category,
            difficulty: self.difficulty,
            unmined: self.unmined,
            paths: self.paths.iter().map(|p| serialize_path(p, graph)).collect(),
        }
    }
}

/// One corpus line. Node references use stable node keys rather than
/// load-order ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaRecord {
    pub id: String,
    pub question: String,
    pub options: [String; 4],
    pub correct_index: usize,
    pub head_key: String,
    pub head_name: String,
    pub answer_key: String,
    pub answer_name: String,
    pub relation: String,
    pub category: TaskCategory,
    pub difficulty: DifficultyLevel,
    pub unmined: bool,
    pub paths: Vec<String>,
}

impl QaRecord {
    pub fn answer(&self) -> &str {
        &self.options[self.correct_index]
    }

    pub fn letter(&self) -> char {
        (b'A' + self.correct_index as u8) as char
    }

    /// Question followed by lettered options, as shown to a model.
    pub fn prompt_text(&self) -> String {
        let mut s = self.question.clone();
        for (i, o) in self.options.iter().enumerate() {
            s.push_str(&format!("\n{}. {}", (b'A' + i as u8) as char, o));
        }
        s
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSplit {
    pub sft: Vec<QAItem>,
    pub rl: Vec<QAItem>,
    pub test: Vec<QAItem>,
}

impl DatasetSplit {
    pub fn get(&self, name: SplitName) -> &[QAItem] {
        match name {
            SplitName::Sft => &self.sft,
            SplitName::Rl => &self.rl,
            SplitName::Test => &self.test,
        }
    }

    fn get_mut(&mut self, name: SplitName) -> &mut Vec<QAItem> {
        match name {
            SplitName::Sft => &mut self.sft,
            SplitName::Rl => &mut self.rl,
            SplitName::Test => &mut self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.sft.len() + self.rl.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Writes one JSON record per line.
pub fn records_to_jsonl(records: &[QaRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub fn read_qa_records(path: &Path) -> Result<Vec<QaRecord>, QaError> {
    let err = |message: String| QaError::Config { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| err(format!("line {}: {e}", i + 1))))
        .collect()
}
