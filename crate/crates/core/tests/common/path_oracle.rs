//! Exhaustive path enumeration straight from the edge list: every simple walk
//! is generated by scanning all steps, with no distance pruning or adjacency index.

use kgcot_core::kg_store::{Graph, InverseMode, INVERSE_PREFIX};
use kgcot_core::path_engine::{ReasoningPath, TemplateKind};
use std::collections::BTreeSet;

pub type Walk = Vec<(u32, u32)>;
/// `(anchor, terminal, kind, branches)` with convergent branches sorted.
pub type Key = (u32, u32, TemplateKind, Vec<Walk>);

pub struct Oracle {
    steps: Vec<(u32, u32, u32)>,
}

impl Oracle {
    pub fn new(graph: &Graph) -> Self {
        let mut steps = Vec::new();
        for e in graph.edges() {
            steps.push((e.head.0, e.relation.0, e.tail.0));
            if graph.inverse_mode() == InverseMode::Virtual {
                let label = format!("{INVERSE_PREFIX}{}", graph.relation_label(e.relation));
                let inv = graph.relation_id(&label).expect("virtual inverse label");
                steps.push((e.tail.0, inv.0, e.head.0));
            }
        }
        Self { steps }
    }

    /// All simple walks from `u` with 1..=max_len steps.
    pub fn walks(&self, u: u32, max_len: usize) -> Vec<Walk> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        let mut seen = vec![u];
        self.extend(u, max_len, &mut cur, &mut seen, &mut out);
        out
    }

    fn extend(&self, at: u32, left: usize, cur: &mut Walk, seen: &mut Vec<u32>, out: &mut Vec<Walk>) {
        if left == 0 {
            return;
        }
        for &(h, r, t) in &self.steps {
            if h != at || seen.contains(&t) {
                continue;
            }
            cur.push((r, t));
            seen.push(t);
            out.push(cur.clone());
            self.extend(t, left - 1, cur, seen, out);
            cur.pop();
            seen.pop();
        }
    }

    /// Every path of the given kinds from `u` to `v` with complexity ≤ `max_d`.
    /// Divergent side branches have at most `max_side` edges.
    pub fn paths(&self, u: u32, v: u32, kinds: &[TemplateKind], max_d: usize, max_side: usize) -> BTreeSet<Key> {
        let mut keys = BTreeSet::new();
        if u == v {
            return keys;
        }
        let all = self.walks(u, max_d);
        let to_v: Vec<&Walk> = all.iter().filter(|w| w.last().unwrap().1 == v).collect();
        for &kind in kinds {
            match kind {
                TemplateKind::Linear => {
                    for w in &to_v {
                        keys.insert((u, v, kind, vec![(*w).clone()]));
                    }
                }
                TemplateKind::Divergent => {
                    for main in &to_v {
                        for side in all.iter().filter(|s| s.len() <= max_side && s.len() + main.len() <= max_d) {
                            if side[0] != main[0] {
                                keys.insert((u, v, kind, vec![side.clone(), (*main).clone()]));
                            }
                        }
                    }
                }
                TemplateKind::Convergent => {
                    for (i, a) in to_v.iter().enumerate() {
                        for b in &to_v[i + 1..] {
                            if a.len() + b.len() <= max_d {
                                let mut pair = vec![(*a).clone(), (*b).clone()];
                                pair.sort();
                                keys.insert((u, v, kind, pair));
                            }
                        }
                    }
                }
            }
        }
        keys
    }
}

pub fn key_of(p: &ReasoningPath) -> Key {
    let mut branches: Vec<Walk> =
        p.branches.iter().map(|b| b.steps.iter().map(|s| (s.relation.0, s.node.0)).collect()).collect();
    if p.kind == TemplateKind::Convergent {
        branches.sort();
    }
    (p.anchor.0, p.terminal.0, p.kind, branches)
}
