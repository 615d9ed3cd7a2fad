//! Synthetic graphs for benchmarks and property tests.

use super::{Graph, GraphBuilder, InverseMode};
use crate::seeding;
use rand::Rng;

/// Preferential-attachment graph: every new node links to `edges_per_node`
/// distinct earlier nodes chosen proportionally to degree. Edges point from the
/// newer node to the older one, so traversal under `Directed` mode is acyclic.
pub fn scale_free(nodes: usize, edges_per_node: usize, relations: usize, mode: InverseMode, seed: u64) -> Graph {
    assert!(edges_per_node >= 1 && relations >= 1);
    let mut rng = seeding::rng(seed);
    let mut b = GraphBuilder::new(mode);
    let rels: Vec<_> = (0..relations).map(|i| b.relation(&format!("r{i}"), &format!("rel {i}")).unwrap()).collect();
    let ids: Vec<_> = (0..nodes)
        .map(|i| b.node(&i.to_string(), &format!("t{}", i % 4), &format!("n{i}"), "synthetic", &i.to_string()))
        .collect();
    // One entry per edge endpoint: sampling uniformly from it is degree-proportional.
    let mut endpoints: Vec<usize> = Vec::with_capacity(nodes * edges_per_node * 2);
    let seed_nodes = (edges_per_node + 1).min(nodes);
    for i in 0..seed_nodes {
        for j in 0..i {
            b.edge(ids[i], rels[rng.random_range(0..relations)], ids[j]);
            endpoints.extend([i, j]);
        }
    }
    let mut targets = Vec::with_capacity(edges_per_node);
    for i in seed_nodes..nodes {
        targets.clear();
        while targets.len() < edges_per_node.min(i) {
            let t = endpoints[rng.random_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            b.edge(ids[i], rels[rng.random_range(0..relations)], ids[t]);
            endpoints.extend([i, t]);
        }
    }
    b.build()
}

/// Uniform random multigraph-free graph with up to `edges` distinct triples.
pub fn random_graph(nodes: usize, edges: usize, relations: usize, mode: InverseMode, seed: u64) -> Graph {
    let mut rng = seeding::rng(seed);
    let mut b = GraphBuilder::new(mode);
    let rels: Vec<_> = (0..relations).map(|i| b.relation(&format!("r{i}"), &format!("r{i}")).unwrap()).collect();
    let ids: Vec<_> =
        (0..nodes).map(|i| b.node(&i.to_string(), "entity", &format!("v{i}"), "synthetic", &i.to_string())).collect();
    if nodes < 2 {
        return b.build();
    }
    let max_distinct = nodes * (nodes - 1) * relations;
    let target = edges.min(max_distinct);
    let mut added = 0;
    while added < target {
        let h = rng.random_range(0..nodes);
        let t = rng.random_range(0..nodes);
        if h == t {
            continue;
        }
        if b.edge(ids[h], rels[rng.random_range(0..relations)], ids[t]) {
            added += 1;
        }
    }
    b.build()
}
