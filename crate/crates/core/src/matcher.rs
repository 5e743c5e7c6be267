//! Incremental trajectory matching against the decision tree.
//!
//! Matching walks the trie one agent step at a time: a step that equals an
//! outgoing edge descends, anything else terminates matching at that step.
//! A mismatch is a value-level outcome, not a fault.

use serde::{Deserialize, Serialize};

use crate::enumerate::DecisionTree;
use crate::model::{
    render_value, StepGroup, Termination, ToolCall, ToolSpec, Trajectory, TurnOutput,
};

/// Failure taxonomy for mismatched trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    ToolError,
    ParamNameHallucination,
    ParamValueHallucination,
    ParamValueError,
    ProtocolError,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 5] = [
        ErrorClass::ToolError,
        ErrorClass::ParamNameHallucination,
        ErrorClass::ParamValueHallucination,
        ErrorClass::ParamValueError,
        ErrorClass::ProtocolError,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ErrorClass::ToolError => "tool_error",
            ErrorClass::ParamNameHallucination => "param_name_hallucination",
            ErrorClass::ParamValueHallucination => "param_value_hallucination",
            ErrorClass::ParamValueError => "param_value_error",
            ErrorClass::ProtocolError => "protocol_error",
        }
    }
}

/// Cursor into the decision tree during matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchState {
    pub node: usize,
    pub matched_calls: usize,
    pub steps_taken: usize,
}

impl MatchState {
    pub fn initial(tree: &DecisionTree) -> Self {
        Self {
            node: tree.root(),
            matched_calls: 0,
            steps_taken: 0,
        }
    }
}

/// Outcome of advancing one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    Descended(MatchState),
    /// No outgoing edge equals the step; matching stops at this step index.
    Mismatch { step_index: usize },
}

/// Attempts to descend one trie edge with the canonical form of `step`.
pub fn advance(state: MatchState, tree: &DecisionTree, step: &StepGroup) -> Advance {
    match tree.child(state.node, step) {
        Some(child) => Advance::Descended(MatchState {
            node: child,
            matched_calls: state.matched_calls + step.len(),
            steps_taken: state.steps_taken + 1,
        }),
        None => Advance::Mismatch {
            step_index: state.steps_taken,
        },
    }
}

/// Final correctness verdict for one task trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub correct: bool,
    /// Fraction of gold calls matched before the first mismatch.
    pub ap: f64,
    pub optimal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorClass>,
}

impl MatchResult {
    pub fn protocol_failure(ap: f64) -> Self {
        Self {
            correct: false,
            ap,
            optimal: false,
            failure_step: None,
            error: Some(ErrorClass::ProtocolError),
        }
    }
}

/// Scores a fully consumed (or failed) traversal.
///
/// Correct means: a terminal was reached with every gold call matched, every
/// tool-call step advanced, and the trajectory ended with emitted text rather
/// than a budget or protocol stop. Optimal additionally requires the step
/// count to equal the minimum path length.
pub fn finalize(
    state: MatchState,
    tree: &DecisionTree,
    trajectory: &Trajectory,
    optimal_length: usize,
    failure: Option<(usize, ErrorClass)>,
) -> MatchResult {
    let total = tree.total_calls().max(1);
    let ap = state.matched_calls as f64 / total as f64;
    if let Some((step_index, error)) = failure {
        return MatchResult {
            correct: false,
            ap,
            optimal: false,
            failure_step: Some(step_index),
            error: Some(error),
        };
    }
    if trajectory.terminated_by != Termination::TextEmitted {
        return MatchResult::protocol_failure(ap);
    }
    let correct = tree.is_terminal(state.node) && state.matched_calls == tree.total_calls();
    MatchResult {
        correct,
        ap: if correct { 1.0 } else { ap },
        optimal: correct && state.steps_taken == optimal_length,
        failure_step: if correct { None } else { Some(state.steps_taken) },
        error: None,
    }
}

/// Drives a whole trajectory through the tree and classifies any failure.
///
/// `step_contexts[i]` is the dialogue text visible to the agent before it
/// emitted tool step `i`; it feeds the value-hallucination check.
pub fn match_trajectory(
    tree: &DecisionTree,
    trajectory: &Trajectory,
    optimal_length: usize,
    schemas: &[ToolSpec],
    step_contexts: &[String],
) -> MatchResult {
    let mut state = MatchState::initial(tree);
    for (index, step) in trajectory.tool_steps().enumerate() {
        match advance(state, tree, step) {
            Advance::Descended(next) => state = next,
            Advance::Mismatch { step_index } => {
                let expected = tree.candidate_steps(state.node);
                let context = step_contexts.get(index).map(String::as_str).unwrap_or("");
                let offender = first_offending_call(step, &expected);
                let error = classify_error(offender, &expected, schemas, context);
                return finalize(state, tree, trajectory, optimal_length, Some((step_index, error)));
            }
        }
    }
    finalize(state, tree, trajectory, optimal_length, None)
}

/// Picks the call that made the step unmatchable, in canonical order.
///
/// First preference: a call appearing in no candidate edge at all; second: a
/// call whose multiplicity exceeds every candidate edge's. When the step
/// fails only on grouping, the first call stands in.
pub fn first_offending_call<'a>(step: &'a StepGroup, expected: &[StepGroup]) -> &'a ToolCall {
    for call in step.calls() {
        if !expected.iter().any(|edge| edge.count_of(call) > 0) {
            return call;
        }
    }
    for call in step.calls() {
        let needed = step.count_of(call);
        if !expected.iter().any(|edge| edge.count_of(call) >= needed) {
            return call;
        }
    }
    &step.calls()[0]
}

/// Assigns a failure class to a single bad call.
///
/// A tool name absent from every candidate edge is a tool error. Otherwise an
/// argument key outside the tool's schema is a name hallucination; an
/// argument value found in no gold candidate and nowhere in the dialogue
/// context is a value hallucination; anything else is a value error.
pub fn classify_error(
    bad_call: &ToolCall,
    expected: &[StepGroup],
    schemas: &[ToolSpec],
    context_text: &str,
) -> ErrorClass {
    let tool_expected = expected
        .iter()
        .flat_map(|edge| edge.calls())
        .any(|call| call.tool == bad_call.tool);
    if !tool_expected {
        return ErrorClass::ToolError;
    }
    let Some(schema) = schemas.iter().find(|spec| spec.name == bad_call.tool) else {
        return ErrorClass::ToolError;
    };
    for (key, _) in bad_call.argument_entries() {
        if !schema.parameters.contains_key(key) {
            return ErrorClass::ParamNameHallucination;
        }
    }
    let candidates: Vec<&ToolCall> = expected
        .iter()
        .flat_map(|edge| edge.calls())
        .filter(|call| call.tool == bad_call.tool)
        .collect();
    let context_lower = context_text.to_lowercase();
    for (_, value) in bad_call.argument_entries() {
        let in_gold = candidates
            .iter()
            .any(|cand| cand.argument_entries().any(|(_, gv)| gv == value));
        if in_gold {
            continue;
        }
        let rendered = render_value(value).to_lowercase();
        if !rendered.is_empty() && context_lower.contains(&rendered) {
            continue;
        }
        return ErrorClass::ParamValueHallucination;
    }
    ErrorClass::ParamValueError
}

/// Convenience for tests and mocks: a trajectory of tool steps plus a final
/// summary text.
pub fn trajectory_of_steps(case_id: &str, task_index: usize, steps: Vec<StepGroup>) -> Trajectory {
    let mut outputs: Vec<TurnOutput> = steps.into_iter().map(TurnOutput::ToolCalls).collect();
    outputs.push(TurnOutput::Text("done".into()));
    Trajectory {
        case_id: case_id.into(),
        task_index,
        steps: outputs,
        terminated_by: Termination::TextEmitted,
    }
}
