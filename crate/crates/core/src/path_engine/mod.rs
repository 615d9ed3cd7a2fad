//! Template-constrained reasoning paths between question and answer nodes.
//!
//! Three structural templates are supported:
//!
//! - **linear**: one simple chain `u → … → v`;
//! - **divergent**: a side chain leaving `u` plus a main chain `u → … → v`,
//!   whose first steps differ;
//! - **convergent**: two distinct simple chains `u → … → v`.
//!
//! The complexity `d` of a path is its total edge count over all branches and
//! drives the Basic / Medium / Hard stratification.

mod search;

pub use search::{enumerate_paths, instantiate};

use crate::kg_store::{Graph, NodeId, RelId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no question entities linked")]
    EmptyQuestionNodes,
    #[error("no answer entities linked")]
    EmptyAnswerNodes,
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("complexity must be at least 1, got {0}")]
    InvalidComplexity(usize),
    #[error("template registry {path}: {message}")]
    Registry { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    Linear,
    Divergent,
    Convergent,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 3] = [TemplateKind::Linear, TemplateKind::Divergent, TemplateKind::Convergent];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateKind::Linear => "linear",
            TemplateKind::Divergent => "divergent",
            TemplateKind::Convergent => "convergent",
        }
    }

    fn branch_count(self) -> usize {
        match self {
            TemplateKind::Linear => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A template kind with fixed per-branch edge counts. For divergent templates
/// the lengths are `[side, main]`; convergent lengths are kept ascending.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTemplate")]
pub struct PathTemplate {
    kind: TemplateKind,
    branch_lengths: Vec<usize>,
}

#[derive(Deserialize)]
struct RawTemplate {
    kind: TemplateKind,
    branch_lengths: Vec<usize>,
}

impl TryFrom<RawTemplate> for PathTemplate {
    type Error = PathError;
    fn try_from(raw: RawTemplate) -> Result<Self, Self::Error> {
        PathTemplate::new(raw.kind, raw.branch_lengths)
    }
}

impl PathTemplate {
    pub fn new(kind: TemplateKind, mut branch_lengths: Vec<usize>) -> Result<Self, PathError> {
        if branch_lengths.len() != kind.branch_count() {
            return Err(PathError::InvalidTemplate(format!(
                "{kind} template needs {} branch length(s), got {}",
                kind.branch_count(),
                branch_lengths.len()
            )));
        }
        if branch_lengths.contains(&0) {
            return Err(PathError::InvalidTemplate("branch lengths must be at least 1".into()));
        }
        if kind == TemplateKind::Convergent {
            branch_lengths.sort_unstable();
        }
        Ok(Self { kind, branch_lengths })
    }

    pub fn linear(len: usize) -> Self {
        Self::new(TemplateKind::Linear, vec![len]).expect("linear length >= 1")
    }

    pub fn divergent(side: usize, main: usize) -> Self {
        Self::new(TemplateKind::Divergent, vec![side, main]).expect("divergent lengths >= 1")
    }

    pub fn convergent(a: usize, b: usize) -> Self {
        Self::new(TemplateKind::Convergent, vec![a, b]).expect("convergent lengths >= 1")
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn branch_lengths(&self) -> &[usize] {
        &self.branch_lengths
    }

    /// Complexity of every path instantiating this template.
    pub fn total_length(&self) -> usize {
        self.branch_lengths.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Step {
    pub relation: RelId,
    pub node: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub steps: Vec<Step>,
}

impl Branch {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last_node(&self) -> Option<NodeId> {
        self.steps.last().map(|s| s.node)
    }
}

/// A concrete path structure. Field order is the canonical ordering.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReasoningPath {
    pub anchor: NodeId,
    pub terminal: NodeId,
    pub kind: TemplateKind,
    pub branches: Vec<Branch>,
    pub complexity: usize,
}

impl ReasoningPath {
    pub fn linear(anchor: NodeId, chain: Branch) -> Self {
        let terminal = chain.last_node().unwrap_or(anchor);
        let complexity = chain.len();
        Self { anchor, terminal, kind: TemplateKind::Linear, branches: vec![chain], complexity }
    }

    pub fn divergent(anchor: NodeId, side: Branch, main: Branch) -> Self {
        let terminal = main.last_node().unwrap_or(anchor);
        let complexity = side.len() + main.len();
        Self { anchor, terminal, kind: TemplateKind::Divergent, branches: vec![side, main], complexity }
    }

    pub fn convergent(anchor: NodeId, a: Branch, b: Branch) -> Self {
        let terminal = a.last_node().unwrap_or(anchor);
        let complexity = a.len() + b.len();
        let branches = if a <= b { vec![a, b] } else { vec![b, a] };
        Self { anchor, terminal, kind: TemplateKind::Convergent, branches, complexity }
    }

    /// Ordering/dedup key: anchor, terminal, kind and branches, with the two
    /// branches of a convergent path in ascending order.
    pub fn canonical_key(&self) -> (NodeId, NodeId, TemplateKind, Vec<Branch>) {
        let mut branches = self.branches.clone();
        if self.kind == TemplateKind::Convergent {
            branches.sort();
        }
        (self.anchor, self.terminal, self.kind, branches)
    }

    pub fn difficulty(&self) -> Result<DifficultyLevel, PathError> {
        classify_difficulty(self.complexity)
    }
}

/// Total edge count across branches.
pub fn complexity(path: &ReasoningPath) -> usize {
    path.branches.iter().map(Branch::len).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DifficultyLevel {
    Basic,
    Medium,
    Hard,
}

impl DifficultyLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            DifficultyLevel::Basic => "Basic",
            DifficultyLevel::Medium => "Medium",
            DifficultyLevel::Hard => "Hard",
        }
    }
}

impl fmt::Display for DifficultyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `d ≤ 5` → Basic, `6 ≤ d ≤ 7` → Medium, `d ≥ 8` → Hard.
pub fn classify_difficulty(d: usize) -> Result<DifficultyLevel, PathError> {
    match d {
        0 => Err(PathError::InvalidComplexity(d)),
        1..=5 => Ok(DifficultyLevel::Basic),
        6 | 7 => Ok(DifficultyLevel::Medium),
        _ => Ok(DifficultyLevel::Hard),
    }
}

fn branch_conforms(graph: &Graph, anchor: NodeId, branch: &Branch) -> bool {
    if branch.is_empty() {
        return false;
    }
    let mut seen = Vec::with_capacity(branch.len() + 1);
    seen.push(anchor);
    let mut prev = anchor;
    for step in &branch.steps {
        if seen.contains(&step.node) || !graph.has_step(prev, step.relation, step.node) {
            return false;
        }
        seen.push(step.node);
        prev = step.node;
    }
    true
}

/// Checks every structural invariant of `path` against the graph's edges.
pub fn validate(path: &ReasoningPath, graph: &Graph) -> bool {
    if path.branches.len() != path.kind.branch_count() || path.complexity != complexity(path) {
        return false;
    }
    if !path.branches.iter().all(|b| branch_conforms(graph, path.anchor, b)) {
        return false;
    }
    let ends_at_terminal = |b: &Branch| b.last_node() == Some(path.terminal);
    match path.kind {
        TemplateKind::Linear => ends_at_terminal(&path.branches[0]),
        TemplateKind::Divergent => {
            ends_at_terminal(&path.branches[1]) && path.branches[0].steps[0] != path.branches[1].steps[0]
        }
        TemplateKind::Convergent => path.branches.iter().all(ends_at_terminal) && path.branches[0] != path.branches[1],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLimits {
    /// Longest branch any template may use; longer templates are skipped and
    /// flagged as truncation.
    pub max_branch_len: usize,
    /// Maximum paths returned per `(template, u, v)` instantiation.
    pub max_results: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_branch_len: 8, max_results: 100_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathSet {
    pub paths: Vec<ReasoningPath>,
    /// Set when at least one admissible path was not returned.
    pub truncated: bool,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrunePolicy {
    /// Number of paths kept after ordering by `(complexity, canonical key)`.
    pub k: usize,
}

impl Default for PrunePolicy {
    fn default() -> Self {
        Self { k: 8 }
    }
}

/// Deduplicates, orders by `(complexity, canonical key)` and keeps the first `k`.
pub fn prune_paths(paths: impl IntoIterator<Item = ReasoningPath>, policy: &PrunePolicy) -> Vec<ReasoningPath> {
    let mut keyed: Vec<_> = paths.into_iter().map(|p| ((p.complexity, p.canonical_key()), p)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    keyed.into_iter().take(policy.k).map(|(_, p)| p).collect()
}

/// The set of templates searched. The standard registry holds every linear,
/// divergent and convergent shape up to a complexity bound; custom shapes can
/// be added or loaded from a TOML file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRegistry {
    #[serde(rename = "template")]
    templates: Vec<PathTemplate>,
}

impl TemplateRegistry {
    /// Every template with total length `≤ max_d`; divergent side branches are
    /// at most `max_side` edges.
    pub fn standard(max_d: usize, max_side: usize) -> Self {
        Self::of_kinds(&TemplateKind::ALL, max_d, max_side)
    }

    pub fn of_kinds(kinds: &[TemplateKind], max_d: usize, max_side: usize) -> Self {
        let mut reg = Self::default();
        for &kind in kinds {
            match kind {
                TemplateKind::Linear => (1..=max_d).for_each(|l| reg.push(PathTemplate::linear(l))),
                TemplateKind::Divergent => {
                    for side in 1..=max_side {
                        for main in 1..=max_d.saturating_sub(side) {
                            reg.push(PathTemplate::divergent(side, main));
                        }
                    }
                }
                TemplateKind::Convergent => {
                    for a in 1..=max_d / 2 {
                        for b in a..=max_d - a {
                            reg.push(PathTemplate::convergent(a, b));
                        }
                    }
                }
            }
        }
        reg
    }

    pub fn from_templates(templates: impl IntoIterator<Item = PathTemplate>) -> Self {
        let mut reg = Self::default();
        templates.into_iter().for_each(|t| reg.push(t));
        reg
    }

    pub fn push(&mut self, template: PathTemplate) {
        if !self.templates.contains(&template) {
            self.templates.push(template);
        }
    }

    pub fn templates(&self) -> &[PathTemplate] {
        &self.templates
    }

    pub fn load(path: &Path) -> Result<Self, PathError> {
        let err = |message: String| PathError::Registry { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let raw: TemplateRegistry = toml::from_str(&text).map_err(|e| err(e.to_string()))?;
        Ok(Self::from_templates(raw.templates))
    }
}

/// Search configuration bundled for callers that mine many items.
#[derive(Debug, Clone)]
pub struct PathEngine {
    pub registry: TemplateRegistry,
    pub limits: SearchLimits,
    pub prune: PrunePolicy,
}

#[derive(Debug, Clone, Default)]
pub struct MinedPaths {
    /// Pruned paths, ordered by `(complexity, canonical key)`.
    pub paths: Vec<ReasoningPath>,
    /// Smallest complexity among all admissible paths found.
    pub min_complexity: Option<usize>,
    pub found: usize,
    pub truncated: bool,
}

impl PathEngine {
    pub fn new(registry: TemplateRegistry, limits: SearchLimits, prune: PrunePolicy) -> Self {
        Self { registry, limits, prune }
    }

    pub fn standard(max_d: usize) -> Self {
        Self::new(TemplateRegistry::standard(max_d, 2), SearchLimits::default(), PrunePolicy::default())
    }

    pub fn mine(
        &self,
        graph: &Graph,
        q_nodes: &BTreeSet<NodeId>,
        a_nodes: &BTreeSet<NodeId>,
        max_d: usize,
    ) -> Result<MinedPaths, PathError> {
        let set = enumerate_paths(graph, q_nodes, a_nodes, &self.registry, max_d, &self.limits)?;
        let min_complexity = set.paths.iter().map(|p| p.complexity).min();
        let found = set.paths.len();
        Ok(MinedPaths { paths: prune_paths(set.paths, &self.prune), min_complexity, found, truncated: set.truncated })
    }
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Renders one branch as `anchor -[relation]-> node -[relation]-> …`.
pub fn render_branch(graph: &Graph, anchor: NodeId, branch: &Branch) -> String {
    let mut out = clean(graph.name(anchor));
    for step in &branch.steps {
        out.push_str(" -[");
        out.push_str(&clean(graph.relation_label(step.relation)));
        out.push_str("]-> ");
        out.push_str(&clean(graph.name(step.node)));
    }
    out
}

/// One line per path: `kind<TAB>d=<d><TAB>difficulty<TAB>branch[<TAB>branch]`.
pub fn serialize_path(path: &ReasoningPath, graph: &Graph) -> String {
    let level = classify_difficulty(path.complexity).map(DifficultyLevel::as_str).unwrap_or("-");
    let mut line = format!("{}\td={}\t{}", path.kind, path.complexity, level);
    for b in &path.branches {
        line.push('\t');
        line.push_str(&render_branch(graph, path.anchor, b));
    }
    line
}
