//! Depth-first instantiation of templates with distance-to-target pruning.

use super::{Branch, PathError, PathSet, PathTemplate, ReasoningPath, SearchLimits, Step, TemplateKind, TemplateRegistry};
use crate::kg_store::{Graph, NodeId};
use rayon::prelude::*;
use std::collections::{BTreeSet, VecDeque};
use std::ops::ControlFlow;

const FAR: u8 = u8::MAX;

/// Hop distance from every node to `target`, capped at `bound`; nodes farther
/// away get `FAR`.
fn distances_to(graph: &Graph, target: NodeId, bound: usize) -> Vec<u8> {
    let mut dist = vec![FAR; graph.node_count()];
    dist[target.index()] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(n) = queue.pop_front() {
        let d = dist[n.index()];
        if d as usize >= bound {
            continue;
        }
        for &(_, prev) in graph.traversal_rev(n) {
            if dist[prev.index()] == FAR {
                dist[prev.index()] = d + 1;
                queue.push_back(prev);
            }
        }
    }
    dist
}

struct Walker<'a> {
    graph: &'a Graph,
    steps: Vec<Step>,
    visited: Vec<NodeId>,
}

impl<'a> Walker<'a> {
    fn new(graph: &'a Graph, start: NodeId) -> Self {
        Self { graph, steps: Vec::new(), visited: vec![start] }
    }

    /// Simple paths of exactly `remaining` more steps ending at `target`,
    /// visiting `target` only at the end.
    fn walk_to(
        &mut self,
        node: NodeId,
        target: NodeId,
        remaining: usize,
        dist: &[u8],
        emit: &mut dyn FnMut(&[Step]) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if remaining == 0 {
            return if node == target { emit(&self.steps) } else { ControlFlow::Continue(()) };
        }
        let graph = self.graph;
        for &(relation, next) in graph.traversal(node) {
            if (next == target) != (remaining == 1)
                || dist[next.index()] as usize > remaining - 1
                || self.visited.contains(&next)
            {
                continue;
            }
            self.steps.push(Step { relation, node: next });
            self.visited.push(next);
            let flow = self.walk_to(next, target, remaining - 1, dist, emit);
            self.steps.pop();
            self.visited.pop();
            flow?;
        }
        ControlFlow::Continue(())
    }

    /// All simple walks of exactly `remaining` more steps, any endpoint.
    fn free(&mut self, node: NodeId, remaining: usize, out: &mut Vec<Branch>) {
        if remaining == 0 {
            out.push(Branch::new(self.steps.clone()));
            return;
        }
        let graph = self.graph;
        for &(relation, next) in graph.traversal(node) {
            if self.visited.contains(&next) {
                continue;
            }
            self.steps.push(Step { relation, node: next });
            self.visited.push(next);
            self.free(next, remaining - 1, out);
            self.steps.pop();
            self.visited.pop();
        }
    }
}

fn chains(graph: &Graph, u: NodeId, v: NodeId, len: usize, dist: &[u8], emit: &mut dyn FnMut(&[Step]) -> ControlFlow<()>) {
    let _ = Walker::new(graph, u).walk_to(u, v, len, dist, emit);
}

/// Collects results until one more than the cap has been seen.
struct Sink {
    cap: usize,
    paths: Vec<ReasoningPath>,
    truncated: bool,
}

impl Sink {
    fn new(cap: usize) -> Self {
        Self { cap, paths: Vec::new(), truncated: false }
    }

    fn push(&mut self, path: ReasoningPath) -> ControlFlow<()> {
        if self.paths.len() == self.cap {
            self.truncated = true;
            return ControlFlow::Break(());
        }
        self.paths.push(path);
        ControlFlow::Continue(())
    }

    fn finish(mut self) -> PathSet {
        self.paths.sort();
        PathSet { paths: self.paths, truncated: self.truncated }
    }
}

fn instantiate_with(graph: &Graph, template: &PathTemplate, u: NodeId, v: NodeId, limits: &SearchLimits, dist: &[u8]) -> PathSet {
    if template.branch_lengths().iter().any(|&l| l > limits.max_branch_len) {
        return PathSet { paths: Vec::new(), truncated: true };
    }
    let mut sink = Sink::new(limits.max_results);
    let lens = template.branch_lengths();
    match template.kind() {
        TemplateKind::Linear => {
            chains(graph, u, v, lens[0], dist, &mut |steps| sink.push(ReasoningPath::linear(u, Branch::new(steps.to_vec()))));
        }
        TemplateKind::Divergent => {
            let mut sides = Vec::new();
            Walker::new(graph, u).free(u, lens[0], &mut sides);
            if !sides.is_empty() {
                chains(graph, u, v, lens[1], dist, &mut |steps| {
                    for side in sides.iter().filter(|s| s.steps[0] != steps[0]) {
                        sink.push(ReasoningPath::divergent(u, side.clone(), Branch::new(steps.to_vec())))?;
                    }
                    ControlFlow::Continue(())
                });
            }
        }
        TemplateKind::Convergent => {
            let (a, b) = (lens[0], lens[1]);
            // Shorter chains are buffered (bounded by the cap); longer ones stream.
            // Equal lengths pair each new chain with the ones before it.
            let mut shorter: Vec<Branch> = Vec::new();
            if a < b {
                chains(graph, u, v, a, dist, &mut |steps| {
                    if shorter.len() > limits.max_results {
                        return ControlFlow::Break(());
                    }
                    shorter.push(Branch::new(steps.to_vec()));
                    ControlFlow::Continue(())
                });
                if shorter.is_empty() {
                    return sink.finish();
                }
            }
            chains(graph, u, v, b, dist, &mut |steps| {
                let current = Branch::new(steps.to_vec());
                for other in &shorter {
                    sink.push(ReasoningPath::convergent(u, other.clone(), current.clone()))?;
                }
                if a == b {
                    shorter.push(current);
                }
                ControlFlow::Continue(())
            });
        }
    }
    sink.finish()
}

fn check_node(graph: &Graph, n: NodeId) -> Result<(), PathError> {
    if graph.contains_node(n) {
        Ok(())
    } else {
        Err(PathError::UnknownNode(n))
    }
}

/// All instantiations of `template` from `u` to `v`, sorted canonically.
pub fn instantiate(graph: &Graph, template: &PathTemplate, u: NodeId, v: NodeId, limits: &SearchLimits) -> Result<PathSet, PathError> {
    check_node(graph, u)?;
    check_node(graph, v)?;
    let longest = template.branch_lengths().iter().copied().max().unwrap_or(0).min(limits.max_branch_len);
    let dist = distances_to(graph, v, longest);
    Ok(instantiate_with(graph, template, u, v, limits, &dist))
}

/// Union of every registry template with complexity `≤ max_d` over all
/// `(u, v) ∈ q_nodes × a_nodes`. Pairs are searched in parallel; the result is
/// sorted and free of duplicates regardless of scheduling.
pub fn enumerate_paths(
    graph: &Graph,
    q_nodes: &BTreeSet<NodeId>,
    a_nodes: &BTreeSet<NodeId>,
    registry: &TemplateRegistry,
    max_d: usize,
    limits: &SearchLimits,
) -> Result<PathSet, PathError> {
    if q_nodes.is_empty() {
        return Err(PathError::EmptyQuestionNodes);
    }
    if a_nodes.is_empty() {
        return Err(PathError::EmptyAnswerNodes);
    }
    if max_d == 0 {
        return Err(PathError::InvalidComplexity(0));
    }
    for &n in q_nodes.iter().chain(a_nodes) {
        check_node(graph, n)?;
    }
    let templates: Vec<&PathTemplate> = registry.templates().iter().filter(|t| t.total_length() <= max_d).collect();
    let longest = templates
        .iter()
        .flat_map(|t| t.branch_lengths().iter().copied())
        .max()
        .unwrap_or(0)
        .min(limits.max_branch_len);
    let pairs: Vec<(NodeId, NodeId)> = q_nodes.iter().flat_map(|&u| a_nodes.iter().map(move |&v| (u, v))).collect();
    let per_target: Vec<(NodeId, Vec<u8>)> =
        a_nodes.par_iter().map(|&v| (v, distances_to(graph, v, longest))).collect();
    let dist_of = |v: NodeId| &per_target.iter().find(|(t, _)| *t == v).expect("distance table per answer node").1;
    let sets: Vec<PathSet> = pairs
        .par_iter()
        .flat_map_iter(|&(u, v)| {
            let dist = dist_of(v);
            templates.iter().map(move |t| {
                if u == v {
                    PathSet::default()
                } else {
                    instantiate_with(graph, t, u, v, limits, dist)
                }
            })
        })
        .collect();
    let truncated = sets.iter().any(|s| s.truncated);
    let mut paths: Vec<ReasoningPath> = sets.into_iter().flat_map(|s| s.paths).collect();
    paths.sort();
    paths.dedup();
    Ok(PathSet { paths, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg_store::{GraphBuilder, InverseMode};

    /// 0 → 1 → 3, 0 → 2 → 3, 0 → 4, 3 → 0 (cycle back).
    fn diamond() -> (Graph, Vec<NodeId>) {
        let mut b = GraphBuilder::new(InverseMode::Directed);
        let r = b.relation("r", "r").unwrap();
        let n: Vec<_> = (0..5).map(|i| b.node(&i.to_string(), "t", &format!("n{i}"), "s", "x")).collect();
        for (h, t) in [(0, 1), (1, 3), (0, 2), (2, 3), (0, 4), (3, 0)] {
            b.edge(n[h], r, n[t]);
        }
        (b.build(), n)
    }

    #[test]
    fn linear_paths_are_simple_and_end_at_target() {
        let (g, n) = diamond();
        let set = instantiate(&g, &PathTemplate::linear(2), n[0], n[3], &SearchLimits::default()).unwrap();
        assert_eq!(set.len(), 2);
        assert!(!set.truncated);
        assert!(set.paths.iter().all(|p| super::super::validate(p, &g)));
        let none = instantiate(&g, &PathTemplate::linear(3), n[0], n[3], &SearchLimits::default()).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn convergent_pairs_are_unordered_and_distinct() {
        let (g, n) = diamond();
        let set = instantiate(&g, &PathTemplate::convergent(2, 2), n[0], n[3], &SearchLimits::default()).unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn divergent_side_must_leave_on_another_step() {
        let (g, n) = diamond();
        let set = instantiate(&g, &PathTemplate::divergent(1, 2), n[0], n[3], &SearchLimits::default()).unwrap();
        // two mains; each pairs with the two single-step sides it does not share
        assert_eq!(set.len(), 4);
        assert!(set.paths.iter().all(|p| super::super::validate(p, &g)));
    }

    #[test]
    fn truncation_is_flagged() {
        let (g, n) = diamond();
        let limits = SearchLimits { max_branch_len: 8, max_results: 1 };
        let set = instantiate(&g, &PathTemplate::linear(2), n[0], n[3], &limits).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.truncated);
        let exact = SearchLimits { max_branch_len: 8, max_results: 2 };
        assert!(!instantiate(&g, &PathTemplate::linear(2), n[0], n[3], &exact).unwrap().truncated);
    }

    #[test]
    fn empty_node_sets_are_errors() {
        let (g, n) = diamond();
        let reg = TemplateRegistry::standard(3, 1);
        let one = BTreeSet::from([n[0]]);
        let lim = SearchLimits::default();
        assert!(matches!(enumerate_paths(&g, &BTreeSet::new(), &one, &reg, 3, &lim), Err(PathError::EmptyQuestionNodes)));
        assert!(matches!(enumerate_paths(&g, &one, &BTreeSet::new(), &reg, 3, &lim), Err(PathError::EmptyAnswerNodes)));
        let bad = BTreeSet::from([NodeId(99)]);
        assert!(matches!(enumerate_paths(&g, &one, &bad, &reg, 3, &lim), Err(PathError::UnknownNode(_))));
    }
}
