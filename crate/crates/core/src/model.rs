//! Domain records shared across the engine: tools, calls, tasks, cases,
//! trajectories, policies and challenge modes.
//!
//! Everything here is an immutable value record after construction and can be
//! shared freely across threads. Tool-call arguments are always held in
//! canonical form (see [`canonicalize_arguments`]) so that equality tests are
//! deterministic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::graph::DependencyGraph;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("arguments must be a JSON object, got {0}")]
    MalformedArguments(&'static str),
    #[error("step group must contain at least one call")]
    EmptyStepGroup,
    #[error("dependency graph has no nodes")]
    EmptyGraph,
    #[error("invalid test case `{case_id}`: {reason}")]
    InvalidCase { case_id: String, reason: String },
}

/// Puts a raw argument document into canonical form.
///
/// Keys are sorted, string values are trimmed of surrounding whitespace,
/// integer-valued floats collapse to integers and nested structures are
/// canonicalized recursively. Canonicalization is idempotent.
pub fn canonicalize_arguments(raw: Value) -> Result<Value, ModelError> {
    match raw {
        Value::Object(map) => Ok(canonicalize_map(map)),
        other => Err(ModelError::MalformedArguments(json_kind(&other))),
    }
}

fn json_kind(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn canonicalize_map(map: serde_json::Map<String, Value>) -> Value {
    // Re-insert in sorted key order so the result is key-sorted even if
    // serde_json is built with order-preserving maps.
    let mut entries: Vec<(String, Value)> = map.into_iter().collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = serde_json::Map::new();
    for (key, value) in entries {
        out.insert(key, canonicalize_value(value));
    }
    Value::Object(out)
}

fn canonicalize_value(value: Value) -> Value {
    match value {
        Value::String(s) => Value::String(s.trim().to_string()),
        Value::Number(n) => Value::Number(canonical_number(n)),
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize_value).collect()),
        Value::Object(map) => canonicalize_map(map),
        other => other,
    }
}

fn canonical_number(n: serde_json::Number) -> serde_json::Number {
    if !n.is_f64() {
        return n;
    }
    let f = n.as_f64().expect("float number");
    // Integral floats inside the exactly-representable i64 range collapse to
    // integers; everything else keeps serde_json's shortest float rendering.
    if f.fract() == 0.0 && f >= i64::MIN as f64 && f < i64::MAX as f64 {
        serde_json::Number::from(f as i64)
    } else {
        n
    }
}

/// Renders a canonical value the way it would appear in dialogue text:
/// bare strings without quotes, everything else as compact JSON.
pub fn render_value(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One tool invocation with canonical arguments.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawToolCall")]
pub struct ToolCall {
    pub tool: String,
    pub arguments: Value,
}

#[derive(Deserialize)]
struct RawToolCall {
    tool: String,
    arguments: Value,
}

impl TryFrom<RawToolCall> for ToolCall {
    type Error = ModelError;

    fn try_from(raw: RawToolCall) -> Result<Self, Self::Error> {
        ToolCall::new(raw.tool, raw.arguments)
    }
}

impl ToolCall {
    pub fn new(tool: impl Into<String>, arguments: Value) -> Result<Self, ModelError> {
        Ok(Self {
            tool: tool.into(),
            arguments: canonicalize_arguments(arguments)?,
        })
    }

    /// Stable textual form used for ordering and map keys.
    pub fn canonical_key(&self) -> String {
        format!("{}\u{1f}{}", self.tool, self.arguments)
    }

    pub fn argument_entries(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.arguments
            .as_object()
            .into_iter()
            .flat_map(|map| map.iter())
    }
}

impl PartialEq for ToolCall {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_key() == other.canonical_key()
    }
}

impl Eq for ToolCall {}

impl PartialOrd for ToolCall {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ToolCall {
    fn cmp(&self, other: &Self) -> Ordering {
        self.canonical_key().cmp(&other.canonical_key())
    }
}

/// A set of tool calls issued in parallel within one agent turn.
///
/// Groups have multiset semantics: equality is order-insensitive and
/// identical duplicate calls are kept. Calls are stored sorted so that two
/// equal groups compare equal structurally.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<ToolCall>", into = "Vec<ToolCall>")]
pub struct StepGroup {
    calls: Vec<ToolCall>,
}

impl TryFrom<Vec<ToolCall>> for StepGroup {
    type Error = ModelError;

    fn try_from(calls: Vec<ToolCall>) -> Result<Self, Self::Error> {
        StepGroup::new(calls)
    }
}

impl From<StepGroup> for Vec<ToolCall> {
    fn from(group: StepGroup) -> Self {
        group.calls
    }
}

impl StepGroup {
    pub fn new(mut calls: Vec<ToolCall>) -> Result<Self, ModelError> {
        if calls.is_empty() {
            return Err(ModelError::EmptyStepGroup);
        }
        calls.sort();
        Ok(Self { calls })
    }

    pub fn single(call: ToolCall) -> Self {
        Self { calls: vec![call] }
    }

    pub fn calls(&self) -> &[ToolCall] {
        &self.calls
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    /// Multiplicity of `call` within the group.
    pub fn count_of(&self, call: &ToolCall) -> usize {
        self.calls.iter().filter(|c| *c == call).count()
    }

    /// Human-readable label used in path dumps.
    pub fn label(&self) -> String {
        self.calls
            .iter()
            .map(|c| format!("{}({})", c.tool, c.arguments))
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

/// Environment feedback for one tool call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub status_code: i64,
    pub response: Value,
}

impl Observation {
    /// Generic reply for calls the static environment has no script for.
    pub fn unrecognized() -> Self {
        Self {
            status_code: 400,
            response: serde_json::json!({ "error": "unrecognized call" }),
        }
    }
}

/// Fine-grained agent policy categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyType {
    Single,
    MultiSerial,
    MultiParallel,
    MultiMixed,
    Chat,
    Clarify,
}

impl PolicyType {
    pub fn coarse(self) -> CoarsePolicy {
        match self {
            PolicyType::Single => CoarsePolicy::Single,
            PolicyType::MultiSerial | PolicyType::MultiParallel | PolicyType::MultiMixed => {
                CoarsePolicy::Multi
            }
            PolicyType::Chat => CoarsePolicy::Chat,
            PolicyType::Clarify => CoarsePolicy::Clarify,
        }
    }

    pub fn is_multi(self) -> bool {
        self.coarse() == CoarsePolicy::Multi
    }

    /// True when the gold behavior is a tool-call plan rather than text.
    pub fn is_tool_policy(self) -> bool {
        matches!(
            self,
            PolicyType::Single
                | PolicyType::MultiSerial
                | PolicyType::MultiParallel
                | PolicyType::MultiMixed
        )
    }
}

/// Coarse projection of [`PolicyType`] used by transition counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoarsePolicy {
    Single,
    Multi,
    Chat,
    Clarify,
}

impl CoarsePolicy {
    pub const ALL: [CoarsePolicy; 4] = [
        CoarsePolicy::Single,
        CoarsePolicy::Multi,
        CoarsePolicy::Chat,
        CoarsePolicy::Clarify,
    ];

    pub fn code(self) -> char {
        match self {
            CoarsePolicy::Single => 's',
            CoarsePolicy::Multi => 'm',
            CoarsePolicy::Chat => 'c',
            CoarsePolicy::Clarify => 'q',
        }
    }
}

/// How a task hides information the agent must recover from history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HidingStrategy {
    Omit,
    Reference,
    LongContext,
    None,
}

/// The three evaluation protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChallengeMode {
    #[serde(rename = "c1")]
    C1FullExecution,
    #[serde(rename = "c2")]
    C2RedactedHistory,
    #[serde(rename = "c3")]
    C3InjectedHistory,
}

/// Parameter descriptor inside a tool schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    #[serde(rename = "type")]
    pub type_tag: String,
    #[serde(default)]
    pub required: bool,
    /// Enum values, when the parameter is an enumeration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Value>>,
    /// Element descriptor, when the parameter is an array.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub items: Option<Box<ParamSpec>>,
    /// Field descriptors, when the parameter is an object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<BTreeMap<String, ParamSpec>>,
}

impl ParamSpec {
    pub fn simple(type_tag: &str, required: bool) -> Self {
        Self {
            type_tag: type_tag.to_string(),
            required,
            values: None,
            items: None,
            fields: None,
        }
    }
}

/// Schema of one callable tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: BTreeMap<String, ParamSpec>,
}

impl ToolSpec {
    pub fn required_parameters(&self) -> impl Iterator<Item = &String> {
        self.parameters
            .iter()
            .filter(|(_, p)| p.required)
            .map(|(name, _)| name)
    }
}

/// A scripted environment entry: the observation returned for one exact
/// (tool, canonical arguments) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScriptedObservation")]
pub struct ScriptedObservation {
    pub tool: String,
    pub arguments: Value,
    pub observation: Observation,
}

#[derive(Deserialize)]
struct RawScriptedObservation {
    tool: String,
    arguments: Value,
    observation: Observation,
}

impl TryFrom<RawScriptedObservation> for ScriptedObservation {
    type Error = ModelError;

    fn try_from(raw: RawScriptedObservation) -> Result<Self, Self::Error> {
        Ok(Self {
            tool: raw.tool,
            arguments: canonicalize_arguments(raw.arguments)?,
            observation: raw.observation,
        })
    }
}

impl ScriptedObservation {
    pub fn new(call: &ToolCall, observation: Observation) -> Self {
        Self {
            tool: call.tool.clone(),
            arguments: call.arguments.clone(),
            observation,
        }
    }

    pub fn matches(&self, call: &ToolCall) -> bool {
        self.tool == call.tool && self.arguments == call.arguments
    }
}

/// One user task inside a test case, with its gold annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub user_text: String,
    pub gold_policy: PolicyType,
    pub hiding: HidingStrategy,
    pub gold_graph: DependencyGraph,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_clarify_params: Vec<String>,
    pub gold_summary: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scripted_observations: Vec<ScriptedObservation>,
}

impl Task {
    /// Exact-key lookup into the scripted environment.
    pub fn scripted_observation(&self, call: &ToolCall) -> Option<&Observation> {
        self.scripted_observations
            .iter()
            .find(|entry| entry.matches(call))
            .map(|entry| &entry.observation)
    }

    pub fn gold_call_count(&self) -> usize {
        self.gold_graph.node_count()
    }
}

/// A multi-task benchmark item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub tools: Vec<ToolSpec>,
    pub tasks: Vec<Task>,
    pub env_info: String,
}

impl TestCase {
    pub fn tool(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.name == name)
    }

    /// Coarse policy sequence over all tasks, in order.
    pub fn policy_sequence(&self) -> Vec<CoarsePolicy> {
        self.tasks.iter().map(|t| t.gold_policy.coarse()).collect()
    }

    /// Checks every structural invariant of the case.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: String| ModelError::InvalidCase {
            case_id: self.id.clone(),
            reason,
        };
        if self.id.is_empty() {
            return Err(fail("empty case id".into()));
        }
        if self.tasks.is_empty() || self.tasks.len() > 4 {
            return Err(fail(format!(
                "case must have 1..=4 tasks, has {}",
                self.tasks.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for tool in &self.tools {
            if !seen.insert(tool.name.as_str()) {
                return Err(fail(format!("duplicate tool name `{}`", tool.name)));
            }
        }
        for (index, task) in self.tasks.iter().enumerate() {
            let nodes = task.gold_graph.node_count();
            match task.gold_policy {
                PolicyType::Single => {
                    if nodes != 1 {
                        return Err(fail(format!(
                            "task {index}: single policy requires exactly 1 gold call, has {nodes}"
                        )));
                    }
                }
                PolicyType::MultiSerial | PolicyType::MultiParallel | PolicyType::MultiMixed => {
                    if nodes < 2 {
                        return Err(fail(format!(
                            "task {index}: multi policy requires >=2 gold calls, has {nodes}"
                        )));
                    }
                    let derived = derive_policy_subtype(&task.gold_graph)
                        .map_err(|e| fail(format!("task {index}: {e}")))?;
                    if derived != task.gold_policy {
                        return Err(fail(format!(
                            "task {index}: graph shape derives {derived:?}, annotated {:?}",
                            task.gold_policy
                        )));
                    }
                }
                PolicyType::Chat | PolicyType::Clarify => {
                    if nodes != 0 {
                        return Err(fail(format!(
                            "task {index}: chat/clarify tasks carry no gold graph, has {nodes} nodes"
                        )));
                    }
                }
            }
            if task.gold_policy == PolicyType::Clarify {
                if task.gold_clarify_params.is_empty() {
                    return Err(fail(format!(
                        "task {index}: clarify task must list missing parameter names"
                    )));
                }
            } else if !task.gold_clarify_params.is_empty() {
                return Err(fail(format!(
                    "task {index}: gold_clarify_params only valid for clarify tasks"
                )));
            }
            for call in task.gold_graph.nodes() {
                if self.tool(&call.tool).is_none() {
                    return Err(fail(format!(
                        "task {index}: gold call references unknown tool `{}`",
                        call.tool
                    )));
                }
            }
        }
        Ok(())
    }
}

/// What the agent produced in one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnOutput {
    ToolCalls(StepGroup),
    Text(String),
}

/// Coarse response kind of a single turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseKind {
    ToolPolicy,
    TextPolicy,
}

/// Projects a turn output onto its coarse response kind.
pub fn classify_output(output: &TurnOutput) -> ResponseKind {
    match output {
        TurnOutput::ToolCalls(_) => ResponseKind::ToolPolicy,
        TurnOutput::Text(_) => ResponseKind::TextPolicy,
    }
}

/// Why a trajectory stopped recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TextEmitted,
    StepBudget,
    ProtocolError,
}

/// The recorded turn outputs of one agent on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub case_id: String,
    pub task_index: usize,
    pub steps: Vec<TurnOutput>,
    pub terminated_by: Termination,
}

impl Trajectory {
    pub fn tool_steps(&self) -> impl Iterator<Item = &StepGroup> {
        self.steps.iter().filter_map(|step| match step {
            TurnOutput::ToolCalls(group) => Some(group),
            TurnOutput::Text(_) => None,
        })
    }

    pub fn tool_step_count(&self) -> usize {
        self.tool_steps().count()
    }
}

/// Derives the fine-grained policy subtype implied by a gold graph's shape.
///
/// One node is `Single`; an edgeless multi-node graph is `MultiParallel`; a
/// graph whose frontier is forced to a single node at every step is
/// `MultiSerial`; anything else mixes serial and parallel structure.
pub fn derive_policy_subtype(graph: &DependencyGraph) -> Result<PolicyType, ModelError> {
    let n = graph.node_count();
    if n == 0 {
        return Err(ModelError::EmptyGraph);
    }
    if n == 1 {
        return Ok(PolicyType::Single);
    }
    if graph.edge_count() == 0 {
        return Ok(PolicyType::MultiParallel);
    }
    let mut visited = BTreeSet::new();
    while visited.len() < n {
        let frontier = graph
            .frontier(&visited)
            .expect("visit order follows dependencies");
        if frontier.eligible.len() != 1 {
            return Ok(PolicyType::MultiMixed);
        }
        visited.extend(frontier.eligible);
    }
    Ok(PolicyType::MultiSerial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use proptest::prelude::*;
    use serde_json::json;

    fn call(tool: &str, args: Value) -> ToolCall {
        ToolCall::new(tool, args).unwrap()
    }

    #[test]
    fn canonicalize_sorts_keys_and_trims_strings() {
        let canon = canonicalize_arguments(json!({"b": 1, "a": "x "})).unwrap();
        assert_eq!(canon.to_string(), r#"{"a":"x","b":1}"#);
    }

    #[test]
    fn canonicalize_normalizes_numbers() {
        let canon = canonicalize_arguments(json!({"lat": 34.050000})).unwrap();
        assert_eq!(canon.to_string(), r#"{"lat":34.05}"#);
        let canon = canonicalize_arguments(json!({"n": 2.0})).unwrap();
        assert_eq!(canon.to_string(), r#"{"n":2}"#);
    }

    #[test]
    fn canonicalize_recurses_into_nested_structures() {
        let canon = canonicalize_arguments(json!({"pos": {"y": 2, "x": 1}})).unwrap();
        assert_eq!(canon.to_string(), r#"{"pos":{"x":1,"y":2}}"#);
    }

    #[test]
    fn canonicalize_rejects_non_objects() {
        assert!(matches!(
            canonicalize_arguments(json!([1, 2])),
            Err(ModelError::MalformedArguments("array"))
        ));
    }

    #[test]
    fn classify_output_projects_turn_kinds() {
        let tool_turn = TurnOutput::ToolCalls(StepGroup::single(call(
            "getCityForecast",
            json!({"city": "Chicago"}),
        )));
        assert_eq!(classify_output(&tool_turn), ResponseKind::ToolPolicy);
        let text = TurnOutput::Text("Could you provide the map ID?".into());
        assert_eq!(classify_output(&text), ResponseKind::TextPolicy);
        // Empty text is still text.
        assert_eq!(
            classify_output(&TurnOutput::Text(String::new())),
            ResponseKind::TextPolicy
        );
    }

    fn toy_calls(n: usize) -> Vec<ToolCall> {
        (0..n).map(|i| call(&format!("tool_{i}"), json!({}))).collect()
    }

    #[test]
    fn subtype_single_node() {
        let g = build_graph(toy_calls(1), &[]).unwrap();
        assert_eq!(derive_policy_subtype(&g).unwrap(), PolicyType::Single);
    }

    #[test]
    fn subtype_independent_nodes_are_parallel() {
        let g = build_graph(toy_calls(2), &[]).unwrap();
        assert_eq!(derive_policy_subtype(&g).unwrap(), PolicyType::MultiParallel);
    }

    #[test]
    fn subtype_chain_is_serial() {
        let g = build_graph(toy_calls(3), &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(derive_policy_subtype(&g).unwrap(), PolicyType::MultiSerial);
    }

    #[test]
    fn subtype_toy_graph_is_mixed() {
        let g = build_graph(toy_calls(4), &[(1, 2), (0, 3), (2, 3)]).unwrap();
        assert_eq!(derive_policy_subtype(&g).unwrap(), PolicyType::MultiMixed);
    }

    #[test]
    fn subtype_rejects_empty_graph() {
        let g = build_graph(vec![], &[]).unwrap();
        assert!(matches!(
            derive_policy_subtype(&g),
            Err(ModelError::EmptyGraph)
        ));
    }

    #[test]
    fn step_group_keeps_duplicate_calls() {
        let a = call("t", json!({"x": 1}));
        let group = StepGroup::new(vec![a.clone(), a.clone()]).unwrap();
        assert_eq!(group.len(), 2);
        assert_eq!(group.count_of(&a), 2);
    }

    #[test]
    fn tool_call_equality_ignores_argument_spelling() {
        let a = call("t", json!({"lat": 34.05, "city": "x"}));
        let b = call("t", json!({"city": "x ", "lat": 34.050000}));
        assert_eq!(a, b);
    }

    fn arb_json_value() -> impl Strategy<Value = Value> {
        let leaf = prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            any::<i64>().prop_map(|n| json!(n)),
            (-1e12f64..1e12f64).prop_map(|f| json!(f)),
            "[ a-zA-Z0-9_-]{0,12}".prop_map(Value::String),
        ];
        leaf.prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
                prop::collection::btree_map("[a-z]{1,6}", inner, 0..4)
                    .prop_map(|m| { Value::Object(m.into_iter().collect()) }),
            ]
        })
    }

    proptest! {
        #[test]
        fn canonicalization_is_idempotent(m in prop::collection::btree_map("[a-z ]{1,8}", arb_json_value(), 0..5)) {
            let raw = Value::Object(m.into_iter().collect());
            let once = canonicalize_arguments(raw).unwrap();
            let twice = canonicalize_arguments(once.clone()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn step_group_equality_is_order_insensitive(perm in prop::sample::subsequence(vec![0usize,1,2,3,4], 1..=5).prop_shuffle()) {
            let calls: Vec<ToolCall> = perm.iter().map(|i| call(&format!("t{i}"), json!({"k": i}))).collect();
            let mut sorted = calls.clone();
            sorted.sort();
            let a = StepGroup::new(calls).unwrap();
            let b = StepGroup::new(sorted).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn multi_node_subtypes_project_to_multi(edges in prop::collection::btree_set((0usize..5, 0usize..5), 0..8)) {
            let filtered: Vec<(usize, usize)> = edges.into_iter().filter(|(a, b)| a < b).collect();
            let g = build_graph(toy_calls(5), &filtered).unwrap();
            let subtype = derive_policy_subtype(&g).unwrap();
            prop_assert_eq!(subtype.coarse(), CoarsePolicy::Multi);
        }
    }
}
