//! Shared graph builders for the benchmarks.

use serde_json::json;
use traceval_core::{build_graph, DependencyGraph, ToolCall};

pub fn calls(n: usize) -> Vec<ToolCall> {
    (0..n)
        .map(|i| ToolCall::new(format!("tool_{i}"), json!({ "slot": i })).unwrap())
        .collect()
}

/// The four-node serial-parallel example graph.
pub fn toy_graph() -> DependencyGraph {
    build_graph(calls(4), &[(1, 2), (0, 3), (2, 3)]).unwrap()
}

/// `layers` layers of `width` nodes; every node depends on the whole
/// previous layer.
pub fn layered_graph(layers: usize, width: usize) -> DependencyGraph {
    let n = layers * width;
    let mut edges = Vec::new();
    for layer in 1..layers {
        for to_slot in 0..width {
            for from_slot in 0..width {
                edges.push(((layer - 1) * width + from_slot, layer * width + to_slot));
            }
        }
    }
    build_graph(calls(n), &edges).unwrap()
}

/// `n` fully independent nodes; the worst case for path growth.
pub fn edgeless_graph(n: usize) -> DependencyGraph {
    build_graph(calls(n), &[]).unwrap()
}
