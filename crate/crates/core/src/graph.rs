//! Gold tool-dependency DAG: construction, validation and frontier queries.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ToolCall;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("dependency cycle: {}", format_cycle(.cycle))]
    CyclicDependency { cycle: Vec<usize> },
    #[error("edge index {index} out of range for {nodes} nodes")]
    IndexOutOfRange { index: usize, nodes: usize },
    #[error("self edge on node {index}")]
    SelfEdge { index: usize },
    #[error("visited set is not downward-closed: node {node} has an unvisited prerequisite")]
    InvalidVisitedSet { node: usize },
}

fn format_cycle(cycle: &[usize]) -> String {
    cycle
        .iter()
        .map(|n| n.to_string())
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// Gold inter-tool dependency DAG for one task.
///
/// Nodes are the annotated gold calls, indexed `0..n`. An edge `(a, b)` means
/// `a` must complete before `b`. Edges may include transitive pairs; frontier
/// logic only consults direct predecessors. Read-only after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct DependencyGraph {
    nodes: Vec<ToolCall>,
    edges: BTreeSet<(usize, usize)>,
    preds: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    nodes: Vec<ToolCall>,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawGraph> for DependencyGraph {
    type Error = GraphError;

    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        build_graph(raw.nodes, &raw.edges)
    }
}

impl From<DependencyGraph> for RawGraph {
    fn from(graph: DependencyGraph) -> Self {
        RawGraph {
            nodes: graph.nodes,
            edges: graph.edges.into_iter().collect(),
        }
    }
}

/// Nodes currently eligible for execution: unvisited, all predecessors visited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frontier {
    pub eligible: BTreeSet<usize>,
}

/// Validates and builds a dependency DAG.
pub fn build_graph(
    nodes: Vec<ToolCall>,
    edges: &[(usize, usize)],
) -> Result<DependencyGraph, GraphError> {
    let n = nodes.len();
    let mut edge_set = BTreeSet::new();
    for &(from, to) in edges {
        if from >= n {
            return Err(GraphError::IndexOutOfRange { index: from, nodes: n });
        }
        if to >= n {
            return Err(GraphError::IndexOutOfRange { index: to, nodes: n });
        }
        if from == to {
            return Err(GraphError::SelfEdge { index: from });
        }
        edge_set.insert((from, to));
    }
    let mut preds = vec![Vec::new(); n];
    let mut succs = vec![Vec::new(); n];
    for &(from, to) in &edge_set {
        preds[to].push(from);
        succs[from].push(to);
    }
    if let Some(cycle) = find_cycle(n, &succs) {
        return Err(GraphError::CyclicDependency { cycle });
    }
    Ok(DependencyGraph {
        nodes,
        edges: edge_set,
        preds,
    })
}

/// DFS coloring; returns one cycle as a node sequence if any exists.
fn find_cycle(n: usize, succs: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Color {
        White,
        Gray,
        Black,
    }
    fn visit(
        node: usize,
        succs: &[Vec<usize>],
        color: &mut [Color],
        stack: &mut Vec<usize>,
    ) -> Option<Vec<usize>> {
        color[node] = Color::Gray;
        stack.push(node);
        for &next in &succs[node] {
            match color[next] {
                Color::Gray => {
                    let start = stack.iter().position(|&s| s == next).unwrap();
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(next);
                    return Some(cycle);
                }
                Color::White => {
                    if let Some(cycle) = visit(next, succs, color, stack) {
                        return Some(cycle);
                    }
                }
                Color::Black => {}
            }
        }
        stack.pop();
        color[node] = Color::Black;
        None
    }

    let mut color = vec![Color::White; n];
    for node in 0..n {
        if color[node] == Color::White {
            if let Some(cycle) = visit(node, succs, &mut color, &mut Vec::new()) {
                return Some(cycle);
            }
        }
    }
    None
}

impl DependencyGraph {
    pub fn empty() -> Self {
        build_graph(vec![], &[]).expect("empty graph is valid")
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[ToolCall] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &ToolCall {
        &self.nodes[index]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn predecessors(&self, node: usize) -> &[usize] {
        &self.preds[node]
    }

    /// Unvisited nodes whose direct predecessors are all visited.
    ///
    /// `visited` must be downward-closed: it may never contain a node whose
    /// prerequisite is still unvisited.
    pub fn frontier(&self, visited: &BTreeSet<usize>) -> Result<Frontier, GraphError> {
        for &node in visited {
            if node >= self.nodes.len() {
                return Err(GraphError::InvalidVisitedSet { node });
            }
            if self.preds[node].iter().any(|p| !visited.contains(p)) {
                return Err(GraphError::InvalidVisitedSet { node });
            }
        }
        let eligible = (0..self.nodes.len())
            .filter(|index| {
                !visited.contains(index) && self.preds[*index].iter().all(|p| visited.contains(p))
            })
            .collect();
        Ok(Frontier { eligible })
    }
}

/// Frontier query against a graph; see [`DependencyGraph::frontier`].
pub fn frontier(graph: &DependencyGraph, visited: &BTreeSet<usize>) -> Result<Frontier, GraphError> {
    graph.frontier(visited)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    fn toy_calls(n: usize) -> Vec<ToolCall> {
        (0..n)
            .map(|i| ToolCall::new(format!("tool_{i}"), json!({"slot": i})).unwrap())
            .collect()
    }

    /// The running four-tool example: [2] needs [1], [3] needs [0] and [2].
    pub(crate) fn toy_graph() -> DependencyGraph {
        build_graph(toy_calls(4), &[(1, 2), (0, 3), (2, 3)]).unwrap()
    }

    fn visited(indices: &[usize]) -> BTreeSet<usize> {
        indices.iter().copied().collect()
    }

    #[test]
    fn builds_the_toy_graph() {
        let g = toy_graph();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.predecessors(3), &[0, 2]);
    }

    #[test]
    fn builds_a_single_node_graph() {
        let g = build_graph(toy_calls(1), &[]).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn rejects_two_cycles() {
        let err = build_graph(toy_calls(2), &[(0, 1), (1, 0)]).unwrap_err();
        match err {
            GraphError::CyclicDependency { cycle } => {
                assert!(cycle.len() >= 3);
                assert_eq!(cycle.first(), cycle.last());
            }
            other => panic!("expected cycle error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_and_self_edges() {
        assert_eq!(
            build_graph(toy_calls(2), &[(0, 5)]).unwrap_err(),
            GraphError::IndexOutOfRange { index: 5, nodes: 2 }
        );
        assert_eq!(
            build_graph(toy_calls(2), &[(1, 1)]).unwrap_err(),
            GraphError::SelfEdge { index: 1 }
        );
    }

    #[test]
    fn frontier_of_empty_visited_set() {
        let g = toy_graph();
        let f = g.frontier(&visited(&[])).unwrap();
        assert_eq!(f.eligible, visited(&[0, 1]));
    }

    #[test]
    fn frontier_after_visiting_one() {
        let g = toy_graph();
        let f = g.frontier(&visited(&[1])).unwrap();
        assert_eq!(f.eligible, visited(&[0, 2]));
    }

    #[test]
    fn frontier_near_completion() {
        let g = toy_graph();
        let f = g.frontier(&visited(&[0, 1, 2])).unwrap();
        assert_eq!(f.eligible, visited(&[3]));
    }

    #[test]
    fn frontier_rejects_non_downward_closed_sets() {
        let g = toy_graph();
        assert_eq!(
            g.frontier(&visited(&[2])).unwrap_err(),
            GraphError::InvalidVisitedSet { node: 2 }
        );
    }

    /// Random DAG: edges only from lower to higher indices.
    fn arb_dag(max_nodes: usize) -> impl Strategy<Value = DependencyGraph> {
        (1..=max_nodes).prop_flat_map(move |n| {
            prop::collection::btree_set((0..n, 0..n), 0..n * 2).prop_map(move |pairs| {
                let edges: Vec<(usize, usize)> =
                    pairs.into_iter().filter(|(a, b)| a < b).collect();
                build_graph(
                    (0..n)
                        .map(|i| ToolCall::new(format!("t{i}"), json!({"i": i})).unwrap())
                        .collect(),
                    &edges,
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn frontier_nonempty_until_all_visited(g in arb_dag(7), choices in prop::collection::vec(any::<prop::sample::Index>(), 0..7)) {
            let mut visited = BTreeSet::new();
            let mut choice_iter = choices.into_iter();
            loop {
                let f = g.frontier(&visited).unwrap();
                if visited.len() == g.node_count() {
                    prop_assert!(f.eligible.is_empty());
                    break;
                }
                prop_assert!(!f.eligible.is_empty(), "frontier empty before full coverage");
                let eligible: Vec<usize> = f.eligible.iter().copied().collect();
                let pick = match choice_iter.next() {
                    Some(index) => *index.get(&eligible),
                    None => eligible[0],
                };
                visited.insert(pick);
            }
        }

        #[test]
        fn visiting_a_frontier_node_preserves_other_eligibility(g in arb_dag(7)) {
            let mut visited = BTreeSet::new();
            while visited.len() < g.node_count() {
                let f = g.frontier(&visited).unwrap();
                let eligible: Vec<usize> = f.eligible.iter().copied().collect();
                let pick = eligible[0];
                visited.insert(pick);
                let after = g.frontier(&visited).unwrap();
                for node in &eligible {
                    if *node != pick {
                        prop_assert!(after.eligible.contains(node));
                    }
                }
            }
        }
    }
}
