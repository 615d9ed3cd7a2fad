//! Typed, directed property graph with per-(node, relation) adjacency indices.
//!
//! A [`Graph`] is immutable once built. Node ids are dense and assigned in
//! order of first appearance; relation labels are interned into [`RelId`]s.
//! Reverse traversal is controlled by [`InverseMode`]: in `Virtual` mode the
//! in-index doubles as the inverse relation (reported under an `inv:` label)
//! without duplicating stored edges.

mod load;
pub mod synth;

pub use load::{load_graph, load_graph_from_reader, write_edge_table, write_snapshot, LoadOptions, SNAPSHOT_MAGIC};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::PathBuf;
use thiserror::Error;

/// Prefix marking the inverse traversal of a stored relation.
pub const INVERSE_PREFIX: &str = "inv:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Interned relation label. Inverse labels (`inv:<r>`) get their own id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelId(pub u32);

impl RelId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    /// External node index from the edge table (`x_index` / `y_index`).
    pub key: String,
    pub node_type: String,
    pub name: String,
    pub aliases: BTreeSet<String>,
    pub source: String,
    pub source_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub head: NodeId,
    pub relation: RelId,
    pub tail: NodeId,
    /// Set on materialized inverse edges: the forward relation they mirror.
    pub inverse_of: Option<RelId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InverseMode {
    /// Edges are traversed head → tail only.
    Directed,
    /// Edges are also traversed tail → head, labelled `inv:<relation>`, via the in-index.
    #[default]
    Virtual,
    /// Every edge gets a stored `inv:<relation>` twin; traversal follows stored edges only.
    Materialized,
}

impl std::str::FromStr for InverseMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "directed" => Ok(Self::Directed),
            "virtual" => Ok(Self::Virtual),
            "materialized" => Ok(Self::Materialized),
            other => Err(format!("unknown inverse mode `{other}` (expected directed|virtual|materialized)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Out,
    In,
    Both,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("edge table is missing required column `{column}`")]
    MissingColumn { column: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    MalformedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("line {line}: node `{key}` has an empty name")]
    EmptyName { line: u64, key: String },
    #[error("relation label `{label}` uses the reserved `inv:` prefix")]
    ReservedRelation { label: String },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("alias `{alias}` refers to unknown node name `{canonical}`")]
    UnknownAliasTarget { alias: String, canonical: String },
    #[error("snapshot: {0}")]
    Snapshot(String),
}

/// CSR adjacency: per node, a slice of `(relation, neighbour)` sorted ascending.
#[derive(Debug, Clone, Default)]
struct Adjacency {
    offsets: Vec<usize>,
    entries: Vec<(RelId, NodeId)>,
}

impl Adjacency {
    fn build(node_count: usize, triples: impl IntoIterator<Item = (NodeId, RelId, NodeId)>) -> Self {
        let mut rows: Vec<(NodeId, RelId, NodeId)> = triples.into_iter().collect();
        rows.sort_unstable();
        rows.dedup();
        let mut offsets = vec![0usize; node_count + 1];
        for &(from, _, _) in &rows {
            offsets[from.index() + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }
        let entries = rows.into_iter().map(|(_, r, to)| (r, to)).collect();
        Self { offsets, entries }
    }

    #[inline]
    fn row(&self, node: NodeId) -> &[(RelId, NodeId)] {
        let i = node.index();
        &self.entries[self.offsets[i]..self.offsets[i + 1]]
    }

    fn with_relation(&self, node: NodeId, rel: RelId) -> &[(RelId, NodeId)] {
        let row = self.row(node);
        let lo = row.partition_point(|&(r, _)| r < rel);
        let hi = row.partition_point(|&(r, _)| r <= rel);
        &row[lo..hi]
    }

    fn contains(&self, node: NodeId, rel: RelId, other: NodeId) -> bool {
        self.row(node).binary_search(&(rel, other)).is_ok()
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    node_types: BTreeSet<String>,
    relations: Vec<String>,
    relation_display: Vec<String>,
    inverse_label: Vec<Option<RelId>>,
    forward_of: Vec<Option<RelId>>,
    rel_lookup: HashMap<String, RelId>,
    key_lookup: HashMap<String, NodeId>,
    name_lookup: HashMap<String, Vec<NodeId>>,
    mode: InverseMode,
    out_adj: Adjacency,
    in_adj: Adjacency,
    trav: Adjacency,
    trav_rev: Adjacency,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub nodes_per_type: BTreeMap<String, usize>,
    pub edges_per_relation: BTreeMap<String, usize>,
}

/// One line of an alias-augmentation table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasEntry {
    pub alias: String,
    pub canonical: String,
}

impl Graph {
    pub fn empty(mode: InverseMode) -> Self {
        GraphBuilder::new(mode).build()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_types(&self) -> &BTreeSet<String> {
        &self.node_types
    }

    pub fn inverse_mode(&self) -> InverseMode {
        self.mode
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, GraphError> {
        self.nodes.get(id.index()).ok_or(GraphError::UnknownNode(id))
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    /// Canonical name of a node. Panics on an id not from this graph.
    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    pub fn node_by_key(&self, key: &str) -> Option<NodeId> {
        self.key_lookup.get(key).copied()
    }

    pub fn nodes_named(&self, name: &str) -> &[NodeId] {
        self.name_lookup.get(name).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn relation_id(&self, label: &str) -> Option<RelId> {
        self.rel_lookup.get(label).copied()
    }

    pub fn relation_label(&self, rel: RelId) -> &str {
        &self.relations[rel.index()]
    }

    pub fn relation_display(&self, rel: RelId) -> &str {
        &self.relation_display[rel.index()]
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    /// Inverse label id for a forward relation, when the graph has one.
    pub fn inverse_of(&self, rel: RelId) -> Option<RelId> {
        self.inverse_label.get(rel.index()).copied().flatten()
    }

    /// Forward relation for an `inv:` label.
    pub fn forward_of(&self, rel: RelId) -> Option<RelId> {
        self.forward_of.get(rel.index()).copied().flatten()
    }

    /// Stored tails of `(head, rel)`, ascending.
    pub fn tails(&self, head: NodeId, rel: RelId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_adj.with_relation(head, rel).iter().map(|&(_, n)| n)
    }

    /// Stored heads of `(tail, rel)`, ascending.
    pub fn heads(&self, tail: NodeId, rel: RelId) -> impl Iterator<Item = NodeId> + '_ {
        self.in_adj.with_relation(tail, rel).iter().map(|&(_, n)| n)
    }

    pub fn has_edge(&self, head: NodeId, rel: RelId, tail: NodeId) -> bool {
        self.contains_node(head) && self.out_adj.contains(head, rel, tail)
    }

    /// Steps available from `node` under the graph's inverse mode, sorted by
    /// `(relation, neighbour)`.
    #[inline]
    pub fn traversal(&self, node: NodeId) -> &[(RelId, NodeId)] {
        self.trav.row(node)
    }

    /// Predecessors under traversal: `(rel, x)` such that `x` steps to `node` via `rel`.
    #[inline]
    pub fn traversal_rev(&self, node: NodeId) -> &[(RelId, NodeId)] {
        self.trav_rev.row(node)
    }

    pub fn has_step(&self, from: NodeId, rel: RelId, to: NodeId) -> bool {
        self.contains_node(from) && self.contains_node(to) && self.trav.contains(from, rel, to)
    }

    /// Neighbours of `node`, optionally restricted to one stored relation.
    ///
    /// In `Virtual` mode in-edges are reported under the `inv:` label of their
    /// relation; otherwise under the stored label. Output is sorted and deduplicated.
    pub fn neighbors(
        &self,
        node: NodeId,
        relation: Option<&str>,
        direction: Direction,
    ) -> Result<Vec<(RelId, NodeId)>, GraphError> {
        if !self.contains_node(node) {
            return Err(GraphError::UnknownNode(node));
        }
        let filter = match relation {
            Some(label) => match self.relation_id(label) {
                Some(r) => Some(r),
                None => return Ok(Vec::new()),
            },
            None => None,
        };
        let keep = |r: RelId| filter.is_none_or(|f| f == r);
        let mut out = Vec::new();
        if matches!(direction, Direction::Out | Direction::Both) {
            out.extend(self.out_adj.row(node).iter().copied().filter(|&(r, _)| keep(r)));
        }
        if matches!(direction, Direction::In | Direction::Both) {
            for &(r, n) in self.in_adj.row(node) {
                if !keep(r) {
                    continue;
                }
                let label = match self.mode {
                    InverseMode::Virtual => self.inverse_of(r).unwrap_or(r),
                    _ => r,
                };
                out.push((label, n));
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    pub fn stats(&self) -> GraphStats {
        let mut stats = GraphStats { node_count: self.nodes.len(), edge_count: self.edges.len(), ..Default::default() };
        for n in &self.nodes {
            *stats.nodes_per_type.entry(n.node_type.clone()).or_default() += 1;
        }
        for e in &self.edges {
            *stats.edges_per_relation.entry(self.relation_label(e.relation).to_string()).or_default() += 1;
        }
        stats
    }

    /// Stored edges as `(head name, relation label, tail name)`, sorted. Used to
    /// compare graphs independently of id assignment.
    pub fn named_triples(&self) -> Vec<(String, String, String)> {
        let mut v: Vec<_> = self
            .edges
            .iter()
            .map(|e| (self.name(e.head).to_string(), self.relation_label(e.relation).to_string(), self.name(e.tail).to_string()))
            .collect();
        v.sort();
        v
    }

    /// Returns a graph with alias strings attached to every node whose name
    /// equals an entry's canonical name.
    pub fn with_aliases(mut self, entries: &[AliasEntry]) -> Result<Graph, GraphError> {
        for entry in entries {
            let ids = self.name_lookup.get(&entry.canonical).cloned().unwrap_or_default();
            if ids.is_empty() {
                return Err(GraphError::UnknownAliasTarget {
                    alias: entry.alias.clone(),
                    canonical: entry.canonical.clone(),
                });
            }
            for id in ids {
                self.nodes[id.index()].aliases.insert(entry.alias.clone());
            }
        }
        Ok(self)
    }
}

/// Incremental construction of a [`Graph`]. Used by the edge-table loader, the
/// snapshot reader and the synthetic generators.
#[derive(Debug)]
pub struct GraphBuilder {
    mode: InverseMode,
    nodes: Vec<Node>,
    key_lookup: HashMap<String, NodeId>,
    relations: Vec<String>,
    relation_display: Vec<String>,
    rel_lookup: HashMap<String, RelId>,
    triples: Vec<(NodeId, RelId, NodeId)>,
    seen: HashSet<(NodeId, RelId, NodeId)>,
}

impl GraphBuilder {
    pub fn new(mode: InverseMode) -> Self {
        Self {
            mode,
            nodes: Vec::new(),
            key_lookup: HashMap::new(),
            relations: Vec::new(),
            relation_display: Vec::new(),
            rel_lookup: HashMap::new(),
            triples: Vec::new(),
            seen: HashSet::new(),
        }
    }

    /// Returns the id for `key`, creating the node on first sight. Metadata of
    /// later occurrences is ignored.
    pub fn node(&mut self, key: &str, node_type: &str, name: &str, source: &str, source_id: &str) -> NodeId {
        if let Some(&id) = self.key_lookup.get(key) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            key: key.to_string(),
            node_type: node_type.to_string(),
            name: name.to_string(),
            aliases: BTreeSet::new(),
            source: source.to_string(),
            source_id: source_id.to_string(),
        });
        self.key_lookup.insert(key.to_string(), id);
        id
    }

    pub fn has_node(&self, key: &str) -> bool {
        self.key_lookup.contains_key(key)
    }

    pub fn set_aliases(&mut self, id: NodeId, aliases: BTreeSet<String>) {
        self.nodes[id.index()].aliases = aliases;
    }

    pub fn relation(&mut self, label: &str, display: &str) -> Result<RelId, GraphError> {
        if let Some(&r) = self.rel_lookup.get(label) {
            return Ok(r);
        }
        if label.starts_with(INVERSE_PREFIX) && self.mode != InverseMode::Directed {
            return Err(GraphError::ReservedRelation { label: label.to_string() });
        }
        let r = RelId(self.relations.len() as u32);
        self.relations.push(label.to_string());
        self.relation_display.push(display.to_string());
        self.rel_lookup.insert(label.to_string(), r);
        Ok(r)
    }

    /// Adds an edge; returns `false` when the exact triple is already present.
    pub fn edge(&mut self, head: NodeId, rel: RelId, tail: NodeId) -> bool {
        let t = (head, rel, tail);
        if self.seen.insert(t) {
            self.triples.push(t);
            true
        } else {
            false
        }
    }

    pub fn build(self) -> Graph {
        let GraphBuilder { mode, nodes, key_lookup, mut relations, mut relation_display, mut rel_lookup, triples, .. } =
            self;
        let forward_count = relations.len();
        let mut inverse_label = vec![None; forward_count];
        let mut forward_of = vec![None; forward_count];
        if mode != InverseMode::Directed {
            for i in 0..forward_count {
                let inv = RelId(relations.len() as u32);
                let label = format!("{INVERSE_PREFIX}{}", relations[i]);
                let display = format!("{INVERSE_PREFIX}{}", relation_display[i]);
                rel_lookup.insert(label.clone(), inv);
                relations.push(label);
                relation_display.push(display);
                inverse_label[i] = Some(inv);
                inverse_label.push(None);
                forward_of.push(Some(RelId(i as u32)));
            }
        }

        let mut edges: Vec<Edge> =
            triples.iter().map(|&(head, relation, tail)| Edge { head, relation, tail, inverse_of: None }).collect();
        if mode == InverseMode::Materialized {
            for &(h, r, t) in &triples {
                edges.push(Edge { head: t, relation: inverse_label[r.index()].unwrap(), tail: h, inverse_of: Some(r) });
            }
        }

        let n = nodes.len();
        let out_adj = Adjacency::build(n, edges.iter().map(|e| (e.head, e.relation, e.tail)));
        let in_adj = Adjacency::build(n, edges.iter().map(|e| (e.tail, e.relation, e.head)));
        let trav_triples: Vec<(NodeId, RelId, NodeId)> = match mode {
            InverseMode::Directed | InverseMode::Materialized => {
                edges.iter().map(|e| (e.head, e.relation, e.tail)).collect()
            }
            InverseMode::Virtual => edges
                .iter()
                .flat_map(|e| [(e.head, e.relation, e.tail), (e.tail, inverse_label[e.relation.index()].unwrap(), e.head)])
                .collect(),
        };
        let trav = Adjacency::build(n, trav_triples.iter().copied());
        let trav_rev = Adjacency::build(n, trav_triples.iter().map(|&(a, r, b)| (b, r, a)));

        let node_types = nodes.iter().map(|n| n.node_type.clone()).collect();
        let mut name_lookup: HashMap<String, Vec<NodeId>> = HashMap::new();
        for node in &nodes {
            name_lookup.entry(node.name.clone()).or_default().push(node.id);
        }

        Graph {
            nodes,
            edges,
            node_types,
            relations,
            relation_display,
            inverse_label,
            forward_of,
            rel_lookup,
            key_lookup,
            name_lookup,
            mode,
            out_adj,
            in_adj,
            trav,
            trav_rev,
        }
    }
}
