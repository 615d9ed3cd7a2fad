mod common;

use common::mini_kg;
use common::path_oracle::{key_of, Key, Oracle};
use kgcot_core::kg_store::synth::{random_graph, scale_free};
use kgcot_core::kg_store::GraphBuilder;
use kgcot_core::path_engine::{
    enumerate_paths, instantiate, serialize_path, validate, PathTemplate, SearchLimits, TemplateKind, TemplateRegistry,
};
use kgcot_core::seeding::{derive_seed, rng};
use kgcot_core::{Graph, InverseMode, NodeId};
use proptest::prelude::*;
use rand::Rng;
use std::collections::BTreeSet;

const MODES: [InverseMode; 3] = [InverseMode::Directed, InverseMode::Virtual, InverseMode::Materialized];

fn unlimited() -> SearchLimits {
    SearchLimits { max_branch_len: 8, max_results: usize::MAX }
}

fn small_graph(seed: u64) -> (Graph, Vec<(NodeId, NodeId)>) {
    let mut r = rng(seed);
    let n = r.random_range(2..=12);
    let e = r.random_range(0..=30);
    let rels = r.random_range(1..=3);
    let mode = MODES[(seed % 3) as usize];
    let g = random_graph(n, e, rels, mode, derive_seed(seed, &[1]));
    let pairs = (0..2)
        .map(|_| {
            let u = r.random_range(0..n);
            let mut v = r.random_range(0..n);
            if v == u {
                v = (u + 1) % n;
            }
            (NodeId(u as u32), NodeId(v as u32))
        })
        .collect();
    (g, pairs)
}

fn engine_keys(g: &Graph, u: NodeId, v: NodeId, kind: TemplateKind, d: usize, max_side: usize) -> BTreeSet<Key> {
    let reg = TemplateRegistry::of_kinds(&[kind], d, max_side);
    let set = enumerate_paths(g, &BTreeSet::from([u]), &BTreeSet::from([v]), &reg, d, &unlimited()).unwrap();
    assert!(!set.truncated);
    for p in &set.paths {
        assert!(validate(p, g), "invalid path {p:?}");
        assert!(p.complexity <= d);
    }
    set.paths.iter().map(key_of).collect()
}

fn check_graph(seed: u64, max_side: usize) {
    let (g, pairs) = small_graph(seed);
    let oracle = Oracle::new(&g);
    for (u, v) in pairs {
        let all = oracle.paths(u.0, v.0, &TemplateKind::ALL, 8, max_side);
        for kind in TemplateKind::ALL {
            for d in 1..=8 {
                let expect: BTreeSet<Key> = all
                    .iter()
                    .filter(|k| k.2 == kind && k.3.iter().map(Vec::len).sum::<usize>() <= d)
                    .cloned()
                    .collect();
                let got = engine_keys(&g, u, v, kind, d, max_side);
                assert_eq!(got, expect, "seed {seed}, {kind} d={d} u={u} v={v}");
            }
        }
    }
}

#[test]
fn enumerate_matches_exhaustive_oracle() {
    for seed in 0..100 {
        check_graph(seed, 2);
    }
}

#[test]
fn enumerate_matches_oracle_with_long_side_branches() {
    for seed in 100..130 {
        check_graph(seed, 7);
    }
}

#[test]
fn instantiate_matches_oracle_per_template() {
    for seed in 200..240 {
        let (g, pairs) = small_graph(seed);
        let oracle = Oracle::new(&g);
        for (u, v) in pairs {
            let all = oracle.paths(u.0, v.0, &TemplateKind::ALL, 6, 2);
            for t in TemplateRegistry::standard(6, 2).templates() {
                let set = instantiate(&g, t, u, v, &unlimited()).unwrap();
                let got: BTreeSet<Key> = set.paths.iter().map(key_of).collect();
                let lens_of = |k: &Key| {
                    let mut l: Vec<usize> = k.3.iter().map(Vec::len).collect();
                    if k.2 == TemplateKind::Convergent {
                        l.sort();
                    }
                    l
                };
                let expect: BTreeSet<Key> = all
                    .iter()
                    .filter(|k| k.2 == t.kind() && lens_of(k) == t.branch_lengths())
                    .cloned()
                    .collect();
                assert_eq!(got, expect, "seed {seed} template {t:?}");
                assert!(set.paths.windows(2).all(|w| w[0] < w[1]), "sorted and unique");
            }
        }
    }
}

fn reversed(g: &Graph) -> Graph {
    let mut b = GraphBuilder::new(InverseMode::Directed);
    for n in g.nodes() {
        b.node(&n.key, &n.node_type, &n.name, &n.source, &n.source_id);
    }
    for e in g.edges() {
        let label = g.relation_label(e.relation);
        let r = b.relation(label, label).unwrap();
        b.edge(e.tail, r, e.head);
    }
    b.build()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Reversing every edge maps u→v chains onto v→u chains one to one.
    #[test]
    fn reversal_symmetry(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let n = r.random_range(2..=10);
        let g = random_graph(n, r.random_range(0..=25), 2, InverseMode::Directed, seed);
        let rg = reversed(&g);
        let (u, v) = (NodeId(0), NodeId(n as u32 - 1));
        for kind in [TemplateKind::Linear, TemplateKind::Convergent] {
            let reg = TemplateRegistry::of_kinds(&[kind], 6, 2);
            let fwd = enumerate_paths(&g, &BTreeSet::from([u]), &BTreeSet::from([v]), &reg, 6, &unlimited()).unwrap();
            let back = enumerate_paths(&rg, &BTreeSet::from([v]), &BTreeSet::from([u]), &reg, 6, &unlimited()).unwrap();
            let hist = |s: &kgcot_core::PathSet| {
                let mut h = [0usize; 7];
                s.paths.iter().for_each(|p| h[p.complexity] += 1);
                h
            };
            prop_assert_eq!(hist(&fwd), hist(&back));
        }
    }

    #[test]
    fn truncation_flag_is_exact(seed in 0u64..10_000, cap in 0usize..40) {
        let g = random_graph(9, 30, 2, InverseMode::Virtual, seed);
        let (u, v) = (NodeId(0), NodeId(8));
        let t = PathTemplate::linear(4);
        let full = instantiate(&g, &t, u, v, &unlimited()).unwrap();
        let capped = instantiate(&g, &t, u, v, &SearchLimits { max_branch_len: 8, max_results: cap }).unwrap();
        prop_assert_eq!(capped.truncated, full.len() > cap);
        prop_assert_eq!(capped.len(), full.len().min(cap));
        prop_assert!(capped.paths.iter().all(|p| full.paths.contains(p)));
    }
}

#[test]
fn long_branch_templates_are_flagged_not_dropped() {
    let (g, pairs) = small_graph(3);
    let (u, v) = pairs[0];
    let set = instantiate(&g, &PathTemplate::linear(5), u, v, &SearchLimits { max_branch_len: 4, max_results: 10 }).unwrap();
    assert!(set.is_empty() && set.truncated);
}

#[test]
fn output_independent_of_thread_count() {
    let g = scale_free(3_000, 3, 4, InverseMode::Virtual, 5);
    let q: BTreeSet<NodeId> = (0..4).map(|i| NodeId(100 + i)).collect();
    let a: BTreeSet<NodeId> = (0..3).map(|i| NodeId(2_000 + i)).collect();
    let reg = TemplateRegistry::standard(4, 1);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| enumerate_paths(&g, &q, &a, &reg, 4, &SearchLimits::default()).unwrap())
    };
    let one = run(1);
    assert!(!one.is_empty());
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
}

#[test]
fn dalfampridine_direct_indication_path() {
    let g = mini_kg(InverseMode::Virtual);
    let dal = g.nodes_named("Dalfampridine")[0];
    let ms = g.nodes_named("multiple sclerosis")[0];
    let set = enumerate_paths(
        &g,
        &BTreeSet::from([dal]),
        &BTreeSet::from([ms]),
        &TemplateRegistry::standard(8, 2),
        8,
        &SearchLimits::default(),
    )
    .unwrap();
    let first = set.paths.iter().min_by_key(|p| (p.complexity, (*p).clone())).unwrap();
    assert_eq!(first.kind, TemplateKind::Linear);
    assert_eq!(serialize_path(first, &g), "linear\td=1\tBasic\tDalfampridine -[indication]-> multiple sclerosis");
    assert!(set.paths.iter().all(|p| validate(p, &g)));
}
