//! Shared inputs for the benchmarks.

use kgcot_core::kg_store::synth::scale_free;
use kgcot_core::seeding::{derive_seed, rng};
use kgcot_core::{Graph, InverseMode, NodeId};

/// Scale-free graph with roughly `edges` edges (four per new node).
pub fn bench_graph(edges: usize, seed: u64) -> Graph {
    scale_free(edges / 4 + 5, 4, 8, InverseMode::Virtual, seed)
}

/// Distinct-endpoint query pairs drawn under `seed`.
pub fn query_pairs(graph: &Graph, n: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    use rand::Rng;
    let mut r = rng(derive_seed(seed, &[n as u64]));
    let nodes = graph.node_count() as u32;
    (0..n)
        .map(|_| {
            let u = r.random_range(0..nodes);
            let mut v = r.random_range(0..nodes);
            while v == u {
                v = r.random_range(0..nodes);
            }
            (NodeId(u), NodeId(v))
        })
        .collect()
}
