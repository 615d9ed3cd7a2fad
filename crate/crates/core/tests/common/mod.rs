//! Shared test helpers and independent oracles.
#![allow(dead_code)]

pub mod bigfix;
pub mod path_oracle;

use kgcot_core::kg_store::{load_graph, Graph, InverseMode, LoadOptions};
use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Fixture path when this module is compiled from another crate's tests.
pub fn core_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn mini_kg_path() -> PathBuf {
    let p = fixture("mini_kg.csv");
    if p.exists() {
        p
    } else {
        core_fixture("mini_kg.csv")
    }
}

pub fn mini_kg(mode: InverseMode) -> Graph {
    load_graph(&mini_kg_path(), &LoadOptions::default().with_inverse(mode)).expect("fixture loads")
}

/// Rows of the fixture edge table split on commas (the fixture has no quoted fields).
pub fn raw_rows() -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(mini_kg_path()).unwrap();
    text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').map(str::to_string).collect()).collect()
}
