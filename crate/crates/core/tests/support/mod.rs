//! Test support: an independent brute-force path oracle and random DAG
//! generation.
//!
//! The oracle enumerates every ordered partition of the node set into
//! non-empty blocks and keeps the ones satisfying the dependency predicate
//! (all direct predecessors in strictly earlier blocks). It never consults
//! frontier logic, so it cross-checks the engine's enumeration independently.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use traceval_core::{build_graph, DependencyGraph, ToolCall};

pub type IndexPath = Vec<BTreeSet<usize>>;

/// All valid execution paths by exhaustive ordered-set-partition search.
pub fn brute_force_paths(graph: &DependencyGraph) -> Vec<IndexPath> {
    let n = graph.node_count();
    let mut all = Vec::new();
    let remaining: BTreeSet<usize> = (0..n).collect();
    let mut current: IndexPath = Vec::new();
    partitions(&remaining, &mut current, &mut all);
    all.into_iter()
        .filter(|partition| respects_dependencies(graph, partition))
        .collect()
}

fn partitions(remaining: &BTreeSet<usize>, current: &mut IndexPath, out: &mut Vec<IndexPath>) {
    if remaining.is_empty() {
        out.push(current.clone());
        return;
    }
    let items: Vec<usize> = remaining.iter().copied().collect();
    // Every non-empty subset of the remaining nodes can be the next block.
    for mask in 1u32..(1 << items.len()) {
        let block: BTreeSet<usize> = items
            .iter()
            .enumerate()
            .filter(|(bit, _)| mask & (1 << bit) != 0)
            .map(|(_, node)| *node)
            .collect();
        let rest: BTreeSet<usize> = remaining.difference(&block).copied().collect();
        current.push(block);
        partitions(&rest, current, out);
        current.pop();
    }
}

fn respects_dependencies(graph: &DependencyGraph, partition: &IndexPath) -> bool {
    let mut done: BTreeSet<usize> = BTreeSet::new();
    for block in partition {
        for &node in block {
            if !graph
                .predecessors(node)
                .iter()
                .all(|pred| done.contains(pred))
            {
                return false;
            }
        }
        done.extend(block.iter().copied());
    }
    true
}

/// Longest dependency chain, in nodes.
pub fn longest_chain(graph: &DependencyGraph) -> usize {
    fn depth(graph: &DependencyGraph, node: usize, memo: &mut Vec<Option<usize>>) -> usize {
        if let Some(cached) = memo[node] {
            return cached;
        }
        let value = 1 + graph
            .predecessors(node)
            .iter()
            .map(|&pred| depth(graph, pred, memo))
            .max()
            .unwrap_or(0);
        memo[node] = Some(value);
        value
    }
    let mut memo = vec![None; graph.node_count()];
    (0..graph.node_count())
        .map(|node| depth(graph, node, &mut memo))
        .max()
        .unwrap_or(0)
}

/// Random DAG with distinct calls; edges go from lower to higher indices.
pub fn random_dag(rng: &mut ChaCha8Rng, max_nodes: usize) -> DependencyGraph {
    let n = rng.random_range(1..=max_nodes);
    let density: f64 = rng.random_range(0.0..0.9);
    let mut edges = Vec::new();
    for from in 0..n {
        for to in (from + 1)..n {
            if rng.random_bool(density) {
                edges.push((from, to));
            }
        }
    }
    let nodes: Vec<ToolCall> = (0..n)
        .map(|i| ToolCall::new(format!("tool_{i}"), json!({ "slot": i })).unwrap())
        .collect();
    build_graph(nodes, &edges).unwrap()
}

/// Random step sequence over the graph's nodes: a mix of genuine paths,
/// truncations and arbitrary subset sequences.
pub fn random_step_sequence(
    rng: &mut ChaCha8Rng,
    graph: &DependencyGraph,
    valid_paths: &[IndexPath],
) -> IndexPath {
    let n = graph.node_count();
    match rng.random_range(0..5u32) {
        // A genuine valid path.
        0 | 1 => valid_paths[rng.random_range(0..valid_paths.len())].clone(),
        // A truncated valid path (incorrect unless complete).
        2 => {
            let path = &valid_paths[rng.random_range(0..valid_paths.len())];
            let keep = rng.random_range(0..=path.len());
            path[..keep].to_vec()
        }
        // Arbitrary non-empty subsets, possibly overlapping or incomplete.
        _ => {
            let steps = rng.random_range(1..=n + 1);
            (0..steps)
                .map(|_| {
                    let size = rng.random_range(1..=n);
                    let mut block = BTreeSet::new();
                    while block.len() < size {
                        block.insert(rng.random_range(0..n));
                    }
                    block
                })
                .collect()
        }
    }
}
