//! Evaluation engine for tool-using agents.
//!
//! The engine enumerates every valid execution path over a task's gold
//! tool-dependency DAG (including parallel step groupings), matches recorded
//! agent trajectories against the resulting decision tree with incremental
//! pruning, and aggregates fine-grained robustness metrics across three
//! challenge protocols: full gold execution history, redacted history (user
//! tasks and summaries only), and redacted history with the gold execution
//! process injected back in.

pub mod corpus;
pub mod enumerate;
pub mod fixtures;
pub mod graph;
pub mod harness;
pub mod matcher;
pub mod metrics;
pub mod model;
pub mod report;

pub use enumerate::{
    build_decision_tree, classify_paths, enumerate_paths, enumerate_paths_capped, DecisionTree,
    EnumerateError, ExecutionPath, PathSet, DEFAULT_NODE_CAP,
};
pub use graph::{build_graph, frontier, DependencyGraph, Frontier, GraphError};
pub use harness::{
    assemble_context, gold_step_sequence, observation_for, run_case, run_cases, CaseResult,
    Connector, ConnectorError, ContextMessage, HarnessError, HttpConnector, MessageBody, Role,
    SessionConfig, SubprocessConnector, TaskEvaluation, TurnReply, TurnRequest,
};
pub use matcher::{
    advance, classify_error, finalize, match_trajectory, Advance, ErrorClass, MatchResult,
    MatchState,
};
pub use metrics::{
    acc2, compute_report, correctness_map, cross_tab, ddd, group_metrics, ptf, vf, CaseLabels,
    CrossTab, Ddd, GroupKey, MetricReport, MetricsError, ScoredCase,
};
pub use model::{
    canonicalize_arguments, classify_output, derive_policy_subtype, ChallengeMode, CoarsePolicy,
    HidingStrategy, ModelError, Observation, ParamSpec, PolicyType, ResponseKind,
    ScriptedObservation, StepGroup, Task, Termination, TestCase, ToolCall, ToolSpec, Trajectory,
    TurnOutput,
};
pub use report::{build_row, emit, EvalRun, LeaderboardRow, ReportError, ReportFormat};
