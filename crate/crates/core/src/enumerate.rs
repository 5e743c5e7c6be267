//! Enumeration of every valid execution path of a dependency DAG, including
//! parallel step groupings, and the decision-tree (trie) form used for
//! incremental trajectory matching.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::graph::DependencyGraph;
use crate::model::{StepGroup, ToolCall};

/// Node-count cap guarding against the super-exponential growth of the
/// ordered-set-partition space.
pub const DEFAULT_NODE_CAP: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumerateError {
    #[error("graph has {nodes} nodes, enumeration capped at {cap}")]
    GraphTooLarge { nodes: usize, cap: usize },
    #[error("cannot enumerate an empty graph")]
    EmptyGraph,
}

/// One valid execution path: an ordered partition of the node set where each
/// step was simultaneously eligible given all prior steps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ExecutionPath {
    pub steps: Vec<BTreeSet<usize>>,
}

impl ExecutionPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Resolves node indices to the canonical call groups the agent must emit.
    pub fn resolve(&self, nodes: &[ToolCall]) -> Vec<StepGroup> {
        self.steps
            .iter()
            .map(|step| {
                StepGroup::new(step.iter().map(|&i| nodes[i].clone()).collect())
                    .expect("path steps are non-empty")
            })
            .collect()
    }
}

/// All valid execution paths of one graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathSet {
    pub paths: Vec<ExecutionPath>,
    pub optimal_length: usize,
}

impl PathSet {
    /// First minimum-length path in the deterministic ordering; used as the
    /// canonical gold execution order.
    pub fn first_optimal(&self) -> &ExecutionPath {
        self.paths
            .iter()
            .find(|p| p.len() == self.optimal_length)
            .expect("path set is non-empty")
    }

    pub fn contains(&self, steps: &[BTreeSet<usize>]) -> bool {
        self.paths.iter().any(|p| p.steps == steps)
    }
}

/// Enumerates all valid execution paths with the default node cap.
pub fn enumerate_paths(graph: &DependencyGraph) -> Result<PathSet, EnumerateError> {
    enumerate_paths_capped(graph, DEFAULT_NODE_CAP)
}

/// Enumerates all valid execution paths of `graph`.
///
/// Walks the frontier depth-first; at each stage every non-empty subset of
/// the current frontier (ascending cardinality, then lexicographic) extends
/// the path. Paths are returned sorted lexicographically by their sorted step
/// contents, so output order is reproducible.
pub fn enumerate_paths_capped(
    graph: &DependencyGraph,
    cap: usize,
) -> Result<PathSet, EnumerateError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(EnumerateError::EmptyGraph);
    }
    if n > cap {
        return Err(EnumerateError::GraphTooLarge { nodes: n, cap });
    }

    let mut paths = Vec::new();
    let mut visited = BTreeSet::new();
    let mut current: Vec<BTreeSet<usize>> = Vec::new();
    descend(graph, &mut visited, &mut current, &mut paths);

    paths.sort();
    let optimal_length = paths.iter().map(ExecutionPath::len).min().expect("n >= 1");
    Ok(PathSet {
        paths,
        optimal_length,
    })
}

fn descend(
    graph: &DependencyGraph,
    visited: &mut BTreeSet<usize>,
    current: &mut Vec<BTreeSet<usize>>,
    out: &mut Vec<ExecutionPath>,
) {
    if visited.len() == graph.node_count() {
        out.push(ExecutionPath {
            steps: current.clone(),
        });
        return;
    }
    let frontier = graph
        .frontier(visited)
        .expect("enumeration visits nodes in dependency order");
    let eligible: Vec<usize> = frontier.eligible.into_iter().collect();
    for subset in subsets_by_size_then_lex(&eligible) {
        for &node in &subset {
            visited.insert(node);
        }
        current.push(subset.iter().copied().collect());
        descend(graph, visited, current, out);
        current.pop();
        for &node in &subset {
            visited.remove(&node);
        }
    }
}

/// Non-empty subsets of `items`, ascending cardinality then lexicographic.
fn subsets_by_size_then_lex(items: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=items.len() {
        combinations(items, size, &mut out);
    }
    out
}

fn combinations(items: &[usize], size: usize, out: &mut Vec<Vec<usize>>) {
    fn rec(items: &[usize], size: usize, start: usize, scratch: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if scratch.len() == size {
            out.push(scratch.clone());
            return;
        }
        for index in start..items.len() {
            scratch.push(items[index]);
            rec(items, size, index + 1, scratch, out);
            scratch.pop();
        }
    }
    rec(items, size, 0, &mut Vec::new(), out);
}

/// Splits a path set into minimum-length paths and the rest.
pub fn classify_paths(set: &PathSet) -> (Vec<ExecutionPath>, Vec<ExecutionPath>) {
    let mut optimal = Vec::new();
    let mut suboptimal = Vec::new();
    for path in &set.paths {
        if path.len() == set.optimal_length {
            optimal.push(path.clone());
        } else {
            suboptimal.push(path.clone());
        }
    }
    (optimal, suboptimal)
}

/// Trie of all valid execution paths keyed by canonical call groups.
///
/// Gold nodes with identical (tool, arguments) merge at the call level: two
/// index-level paths that an agent cannot distinguish become one trie path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    total_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct TreeNode {
    children: BTreeMap<StepGroup, usize>,
    terminal: bool,
    matched_calls: usize,
}

/// Index of the tree root.
pub const ROOT: usize = 0;

impl DecisionTree {
    pub fn root(&self) -> usize {
        ROOT
    }

    /// Gold calls required for full coverage.
    pub fn total_calls(&self) -> usize {
        self.total_calls
    }

    pub fn is_terminal(&self, node: usize) -> bool {
        self.nodes[node].terminal
    }

    /// Gold calls matched along the path from the root to `node`.
    pub fn matched_calls(&self, node: usize) -> usize {
        self.nodes[node].matched_calls
    }

    pub fn child(&self, node: usize, step: &StepGroup) -> Option<usize> {
        self.nodes[node].children.get(step).copied()
    }

    /// Outgoing step-group edges of `node`, in canonical order.
    pub fn candidate_steps(&self, node: usize) -> Vec<StepGroup> {
        self.nodes[node].children.keys().cloned().collect()
    }

    pub fn terminal_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.terminal).count()
    }

    /// Terminals reachable from `node`.
    pub fn terminals_below(&self, node: usize) -> usize {
        let own = usize::from(self.nodes[node].terminal);
        self.nodes[node]
            .children
            .values()
            .map(|&child| self.terminals_below(child))
            .sum::<usize>()
            + own
    }

    /// Root-to-terminal step sequences, in trie order.
    pub fn flatten(&self) -> Vec<Vec<StepGroup>> {
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        self.flatten_from(ROOT, &mut prefix, &mut out);
        out
    }

    fn flatten_from(&self, node: usize, prefix: &mut Vec<StepGroup>, out: &mut Vec<Vec<StepGroup>>) {
        if self.nodes[node].terminal {
            out.push(prefix.clone());
        }
        for (step, &child) in &self.nodes[node].children {
            prefix.push(step.clone());
            self.flatten_from(child, prefix, out);
            prefix.pop();
        }
    }

    /// Serializable dump for audit output.
    pub fn dump(&self) -> serde_json::Value {
        self.dump_node(ROOT)
    }

    fn dump_node(&self, node: usize) -> serde_json::Value {
        let children: serde_json::Map<String, serde_json::Value> = self.nodes[node]
            .children
            .iter()
            .map(|(step, &child)| (step.label(), self.dump_node(child)))
            .collect();
        serde_json::json!({
            "terminal": self.nodes[node].terminal,
            "matched_calls": self.nodes[node].matched_calls,
            "children": children,
        })
    }
}

/// Builds the matching trie from an enumerated path set.
pub fn build_decision_tree(set: &PathSet, nodes: &[ToolCall]) -> DecisionTree {
    let mut tree = DecisionTree {
        nodes: vec![TreeNode::default()],
        total_calls: nodes.len(),
    };
    for path in &set.paths {
        let mut at = ROOT;
        for group in path.resolve(nodes) {
            let matched = tree.nodes[at].matched_calls + group.len();
            at = match tree.nodes[at].children.get(&group) {
                Some(&child) => child,
                None => {
                    let child = tree.nodes.len();
                    tree.nodes.push(TreeNode {
                        children: BTreeMap::new(),
                        terminal: false,
                        matched_calls: matched,
                    });
                    tree.nodes[at].children.insert(group, child);
                    child
                }
            };
        }
        tree.nodes[at].terminal = true;
    }
    tree
}
