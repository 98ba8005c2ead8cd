#![allow(dead_code)]

use attnflow::{analyze, FlowNetwork};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

pub const CASES: u32 = 1000;

/// Fixed-seed config so every run explores the same cases.
pub fn config(seed: u64) -> Config {
    Config {
        cases: CASES,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(seed),
        max_global_rejects: 100_000,
        ..Config::default()
    }
}

pub fn name(i: usize) -> String {
    format!("n{i:02}")
}

/// Weights with at most two decimals in [0.01, 1000].
pub fn weight() -> impl Strategy<Value = f64> {
    (1u32..=100_000).prop_map(|w| w as f64 / 100.0)
}

pub fn raw_edges(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (2..=max_nodes).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((0..n, 0..n, weight()), 1..=3 * n),
        )
    })
}

pub fn network(max_nodes: usize) -> impl Strategy<Value = FlowNetwork> {
    raw_edges(max_nodes).prop_map(|(_, edges)| {
        FlowNetwork::from_edges(edges.into_iter().map(|(s, d, w)| (name(s), name(d), w))).unwrap()
    })
}

/// Networks whose impact can be computed.
pub fn analyzable(max_nodes: usize) -> impl Strategy<Value = FlowNetwork> {
    network(max_nodes).prop_filter("dissipative", |net| analyze(net).is_ok())
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
