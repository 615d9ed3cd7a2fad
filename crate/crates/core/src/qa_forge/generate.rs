use super::{CategorySpec, QAItem, QaError};
use crate::kg_store::{Graph, NodeId, RelId};
use crate::path_engine::{classify_difficulty, enumerate_paths, prune_paths, PathEngine, PathError, ReasoningPath, TemplateKind};
use crate::seeding::{derive_seed, rng};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet, HashSet};

const TAG_HEADS: u64 = 1;
const TAG_TAILS: u64 = 2;
const TAG_ITEM: u64 = 3;

#[derive(Debug, Clone, Default)]
pub struct GenerateOutcome {
    pub items: Vec<QAItem>,
    pub requested: usize,
    /// `(head, relation, tail)` triples of the right node types.
    pub eligible_triples: usize,
    /// Eligible triples dropped because fewer than 3 distractors exist.
    pub skipped_insufficient: usize,
    /// Fewer items than requested could be built.
    pub shortfall: bool,
}

/// One node per distinct name among nodes of `node_type`, the smallest id winning.
fn representatives(graph: &Graph, node_type: &str) -> Vec<NodeId> {
    let mut by_name: BTreeMap<&str, NodeId> = BTreeMap::new();
    for n in graph.nodes().iter().filter(|n| n.node_type == node_type) {
        by_name.entry(n.name.as_str()).or_insert(n.id);
    }
    let mut reps: Vec<_> = by_name.into_values().collect();
    reps.sort_unstable();
    reps
}

/// Candidates that can stand next to any true tail of `(head, rel)` without
/// being correct or duplicating an option string.
fn distractor_pool(graph: &Graph, reps: &[NodeId], head: NodeId, rel: RelId) -> Vec<NodeId> {
    let mut banned: HashSet<&str> = graph.tails(head, rel).map(|t| graph.name(t)).collect();
    banned.insert(graph.name(head));
    reps.iter().copied().filter(|&n| !banned.contains(graph.name(n))).collect()
}

fn pick_three(pool: &[NodeId], rng: &mut impl Rng) -> [NodeId; 3] {
    let idx = rand::seq::index::sample(rng, pool.len(), 3);
    [pool[idx.index(0)], pool[idx.index(1)], pool[idx.index(2)]]
}

fn insufficient(graph: &Graph, head: NodeId, relation: &str, answer: NodeId, available: usize) -> QaError {
    QaError::InsufficientDistractors {
        head: graph.name(head).to_string(),
        relation: relation.to_string(),
        answer: graph.name(answer).to_string(),
        available,
    }
}

/// Three distinct nodes of the answer's type, none a true tail of
/// `(head, relation)`, drawn uniformly under `seed`.
pub fn sample_distractors(graph: &Graph, head: NodeId, relation: &str, answer: NodeId, seed: u64) -> Result<[NodeId; 3], QaError> {
    let rel = graph.relation_id(relation).ok_or_else(|| QaError::UnknownRelation(relation.to_string()))?;
    let answer_type = &graph.node(answer).map_err(|_| PathError::UnknownNode(answer))?.node_type;
    graph.node(head).map_err(|_| PathError::UnknownNode(head))?;
    let pool = distractor_pool(graph, &representatives(graph, answer_type), head, rel);
    if pool.len() < 3 {
        return Err(insufficient(graph, head, relation, answer, pool.len()));
    }
    Ok(pick_three(&pool, &mut rng(seed)))
}

fn build_item(graph: &Graph, spec: &CategorySpec, head: NodeId, answer: NodeId, pool: &[NodeId], seed: u64) -> QAItem {
    let cat = spec.name.index();
    let mut r = rng(derive_seed(seed, &[cat, TAG_ITEM, head.0 as u64, answer.0 as u64]));
    let distractors = pick_three(pool, &mut r);
    let correct_index = r.random_range(0..4);
    let mut names = distractors.iter().map(|&d| graph.name(d).to_string());
    let options: [String; 4] = std::array::from_fn(|i| {
        if i == correct_index {
            graph.name(answer).to_string()
        } else {
            names.next().expect("three distractors")
        }
    });
    let key = |n: NodeId| graph.node(n).map(|n| n.key.clone()).unwrap_or_default();
    QAItem {
        id: format!("{}-{}-{}", spec.name.slug(), key(head), key(answer)),
        question: spec.render_question(graph.name(head)),
        options,
        correct_index,
        head,
        relation: spec.relation.clone(),
        answer,
        category: spec.name,
        difficulty: spec.difficulty_hint,
        paths: Vec::new(),
        unmined: true,
    }
}

/// Builds up to `count` items for one category. Heads are shuffled under the
/// seed and visited in that order; each contributes its tails (shuffled under
/// a per-head seed, at most `max_per_head`) until `count` is reached. Output is
/// ordered by `(head, answer)`.
pub fn generate_qa(graph: &Graph, spec: &CategorySpec, count: usize, seed: u64) -> Result<GenerateOutcome, QaError> {
    spec.validate()?;
    let rel = graph.relation_id(&spec.relation).ok_or_else(|| QaError::UnknownRelation(spec.relation.clone()))?;
    let mut outcome = GenerateOutcome { requested: count, ..Default::default() };
    if count == 0 {
        return Ok(outcome);
    }
    let reps = representatives(graph, &spec.answer_type);
    let mut heads: Vec<(NodeId, Vec<NodeId>, Vec<NodeId>)> = Vec::new();
    for node in graph.nodes().iter().filter(|n| n.node_type == spec.head_type) {
        let tails: BTreeSet<NodeId> = graph
            .tails(node.id, rel)
            .filter(|&t| t != node.id && graph.nodes()[t.index()].node_type == spec.answer_type)
            .collect();
        if tails.is_empty() {
            continue;
        }
        outcome.eligible_triples += tails.len();
        let pool = distractor_pool(graph, &reps, node.id, rel);
        if pool.len() < 3 {
            outcome.skipped_insufficient += tails.len();
            log::debug!("{}: {} has only {} distractor(s)", spec.name, node.name, pool.len());
            continue;
        }
        heads.push((node.id, tails.into_iter().collect(), pool));
    }
    let cat = spec.name.index();
    heads.shuffle(&mut rng(derive_seed(seed, &[cat, TAG_HEADS])));

    let mut selected: Vec<(NodeId, NodeId, usize)> = Vec::new();
    'heads: for (hi, (head, tails, _)) in heads.iter_mut().enumerate() {
        tails.shuffle(&mut rng(derive_seed(seed, &[cat, TAG_TAILS, head.0 as u64])));
        let take = spec.max_per_head.unwrap_or(usize::MAX);
        for &t in tails.iter().take(take) {
            if selected.len() == count {
                break 'heads;
            }
            selected.push((*head, t, hi));
        }
    }
    let mut items: Vec<QAItem> =
        selected.par_iter().map(|&(h, a, hi)| build_item(graph, spec, h, a, &heads[hi].2, seed)).collect();
    items.sort_by_key(|it| (it.head, it.answer));
    outcome.shortfall = items.len() < count;
    outcome.items = items;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AttachOptions {
    /// Ignore the single-edge path that restates the question's own triple.
    pub exclude_direct_edge: bool,
}

fn is_direct_edge(path: &ReasoningPath, rel: Option<RelId>, answer: NodeId) -> bool {
    path.kind == TemplateKind::Linear
        && path.complexity == 1
        && Some(path.branches[0].steps[0].relation) == rel
        && path.terminal == answer
}

/// Mines paths from each item's head to its answer. Difficulty comes from the
/// smallest complexity found; items without any path keep their category's
/// hint and are flagged unmined.
pub fn attach_paths_and_difficulty(
    items: Vec<QAItem>,
    graph: &Graph,
    specs: &[CategorySpec],
    engine: &PathEngine,
    max_d: usize,
    options: &AttachOptions,
) -> Result<Vec<QAItem>, QaError> {
    if max_d == 0 {
        return Err(PathError::InvalidComplexity(0).into());
    }
    items
        .into_par_iter()
        .map(|mut item| {
            let q = BTreeSet::from([item.head]);
            let a = BTreeSet::from([item.answer]);
            let rel = graph.relation_id(&item.relation);
            let mut set = enumerate_paths(graph, &q, &a, &engine.registry, max_d, &engine.limits)?;
            if options.exclude_direct_edge {
                set.paths.retain(|p| !is_direct_edge(p, rel, item.answer));
            }
            match set.paths.iter().map(|p| p.complexity).min() {
                Some(d) => {
                    item.difficulty = classify_difficulty(d)?;
                    item.unmined = false;
                }
                None => {
                    if let Some(spec) = specs.iter().find(|s| s.name == item.category) {
                        item.difficulty = spec.difficulty_hint;
                    }
                    item.unmined = true;
                }
            }
            item.paths = prune_paths(set.paths, &engine.prune);
            Ok(item)
        })
        .collect()
}
