//! Challenge orchestration: context assembly, the turn loop against a
//! connector, static-environment replay and per-case scoring.

pub mod connector;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use connector::{
    Connector, ConnectorError, ContextMessage, HttpConnector, MessageBody, Role,
    SubprocessConnector, TurnReply, TurnRequest, WireCall,
};

use crate::enumerate::{build_decision_tree, enumerate_paths};
use crate::matcher::{self, MatchResult};
use crate::metrics::{self, CaseLabels, ScoredCase};
use crate::model::{
    ChallengeMode, HidingStrategy, Observation, PolicyType, StepGroup, Task, Termination,
    TestCase, ToolCall, Trajectory, TurnOutput,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("task {task_index} lacks the gold data needed for history injection")]
    MissingGoldData { task_index: usize },
    #[error("task index {task_index} out of range for {tasks} tasks")]
    TaskOutOfRange { task_index: usize, tasks: usize },
}

/// Per-session knobs. The step budget defaults to twice the evaluated task's
/// gold call count plus two, leaving room for one full serialization of the
/// gold plan plus the closing summary turn.
#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub mode: ChallengeMode,
    pub step_budget: Option<usize>,
    pub turn_timeout: Duration,
}

impl SessionConfig {
    pub fn new(mode: ChallengeMode) -> Self {
        Self {
            mode,
            step_budget: None,
            turn_timeout: Duration::from_secs(60),
        }
    }

    fn budget_for(&self, task: &Task) -> usize {
        self.step_budget
            .unwrap_or(2 * task.gold_call_count() + 2)
    }
}

/// Scored outcome of one evaluated task, with its full transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvaluation {
    pub task_index: usize,
    pub result: MatchResult,
    pub trajectory: Trajectory,
    pub transcript: Vec<ContextMessage>,
}

/// Result of running one case under one challenge mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub mode: ChallengeMode,
    pub labels: CaseLabels,
    pub tasks: Vec<TaskEvaluation>,
}

impl CaseResult {
    /// A case counts as correct when every evaluated task matched.
    pub fn correct(&self) -> bool {
        !self.tasks.is_empty() && self.tasks.iter().all(|t| t.result.correct)
    }

    pub fn ap(&self) -> f64 {
        if self.tasks.is_empty() {
            return 0.0;
        }
        self.tasks.iter().map(|t| t.result.ap).sum::<f64>() / self.tasks.len() as f64
    }

    pub fn optimal(&self) -> bool {
        !self.tasks.is_empty() && self.tasks.iter().all(|t| t.result.optimal)
    }

    pub fn has_protocol_error(&self) -> bool {
        self.tasks
            .iter()
            .any(|t| t.result.error == Some(matcher::ErrorClass::ProtocolError))
    }

    pub fn scored(&self) -> ScoredCase {
        ScoredCase {
            case_id: self.case_id.clone(),
            correct: self.correct(),
            ap: self.ap(),
            optimal: self.optimal(),
            labels: self.labels.clone(),
        }
    }
}

/// The gold execution order of a task: the first minimum-length path of its
/// dependency graph, resolved to call groups. Chat and clarify tasks have an
/// empty sequence.
pub fn gold_step_sequence(task: &Task, task_index: usize) -> Result<Vec<StepGroup>, HarnessError> {
    if task.gold_graph.node_count() == 0 {
        if task.gold_policy.is_tool_policy() {
            return Err(HarnessError::MissingGoldData { task_index });
        }
        return Ok(Vec::new());
    }
    let set = enumerate_paths(&task.gold_graph)
        .map_err(|_| HarnessError::MissingGoldData { task_index })?;
    Ok(set.first_optimal().resolve(task.gold_graph.nodes()))
}

/// Exact-key lookup into the task's scripted environment; unknown calls get
/// a generic 400 document so scoring, not the environment, assigns failures.
pub fn observation_for(task: &Task, call: &ToolCall) -> Observation {
    task.scripted_observation(call)
        .cloned()
        .unwrap_or_else(Observation::unrecognized)
}

/// Builds the dialogue history the agent sees for `task_index`.
///
/// Redacted history keeps only each prior task's user text and gold summary.
/// Injected history (and full execution) additionally interleaves the gold
/// action/observation pairs in gold order before each summary.
pub fn assemble_context(
    case: &TestCase,
    mode: ChallengeMode,
    task_index: usize,
) -> Result<Vec<ContextMessage>, HarnessError> {
    if task_index >= case.tasks.len() {
        return Err(HarnessError::TaskOutOfRange {
            task_index,
            tasks: case.tasks.len(),
        });
    }
    let mut messages = Vec::new();
    for (index, task) in case.tasks[..task_index].iter().enumerate() {
        messages.push(ContextMessage::user(&task.user_text));
        if mode != ChallengeMode::C2RedactedHistory {
            for group in gold_step_sequence(task, index)? {
                let observations = group
                    .calls()
                    .iter()
                    .map(|call| observation_for(task, call))
                    .collect();
                messages.push(ContextMessage::assistant_calls(group.calls().to_vec()));
                messages.push(ContextMessage::tool_results(observations));
            }
        }
        messages.push(ContextMessage::assistant_text(&task.gold_summary));
    }
    messages.push(ContextMessage::user(&case.tasks[task_index].user_text));
    Ok(messages)
}

/// Extracts the injected gold step sequence from an assembled context.
pub fn injected_steps(messages: &[ContextMessage]) -> Vec<StepGroup> {
    messages
        .iter()
        .filter_map(|message| match (&message.role, &message.body) {
            (Role::Assistant, MessageBody::ToolCalls(calls)) => {
                Some(StepGroup::new(calls.clone()).expect("injected groups are non-empty"))
            }
            _ => None,
        })
        .collect()
}

fn case_labels(case: &TestCase) -> CaseLabels {
    let final_task = case.tasks.last().expect("cases have at least one task");
    CaseLabels {
        ptf: metrics::ptf(&case.policy_sequence()).unwrap_or(0),
        task_count: case.tasks.len(),
        hiding: match final_task.hiding {
            HidingStrategy::None => None,
            other => Some(other),
        },
        subtype: final_task
            .gold_policy
            .is_multi()
            .then_some(final_task.gold_policy),
    }
}

/// Runs one case to completion. Connector failures, malformed replies and
/// budget exhaustion mark the affected task incorrect with a protocol error;
/// they never abort the batch.
pub fn run_case(
    case: &TestCase,
    config: &SessionConfig,
    connector: &mut dyn Connector,
) -> CaseResult {
    let task_indices: Vec<usize> = match config.mode {
        ChallengeMode::C1FullExecution => (0..case.tasks.len()).collect(),
        ChallengeMode::C2RedactedHistory | ChallengeMode::C3InjectedHistory => {
            vec![case.tasks.len() - 1]
        }
    };
    let tasks = task_indices
        .into_iter()
        .map(|task_index| run_task(case, config, connector, task_index))
        .collect();
    CaseResult {
        case_id: case.id.clone(),
        mode: config.mode,
        labels: case_labels(case),
        tasks,
    }
}

fn run_task(
    case: &TestCase,
    config: &SessionConfig,
    connector: &mut dyn Connector,
    task_index: usize,
) -> TaskEvaluation {
    let task = &case.tasks[task_index];
    let mut messages = match assemble_context(case, config.mode, task_index) {
        Ok(messages) => messages,
        Err(_) => {
            let trajectory = Trajectory {
                case_id: case.id.clone(),
                task_index,
                steps: Vec::new(),
                terminated_by: Termination::ProtocolError,
            };
            return TaskEvaluation {
                task_index,
                result: MatchResult::protocol_failure(0.0),
                trajectory,
                transcript: Vec::new(),
            };
        }
    };
    let budget = config.budget_for(task);

    let mut visible_text: String = messages
        .iter()
        .filter_map(ContextMessage::readable_text)
        .collect::<Vec<_>>()
        .join("\n");
    let mut step_contexts: Vec<String> = Vec::new();
    let mut steps: Vec<TurnOutput> = Vec::new();
    let terminated;
    loop {
        if steps.len() > budget {
            terminated = Termination::StepBudget;
            break;
        }
        let request = TurnRequest {
            case_id: case.id.clone(),
            task_index,
            turn: steps.len(),
            env_info: case.env_info.clone(),
            tools: case.tools.clone(),
            messages: messages.clone(),
        };
        match connector.exchange(&request) {
            Ok(TurnReply::Text(text)) => {
                steps.push(TurnOutput::Text(text));
                terminated = Termination::TextEmitted;
                break;
            }
            Ok(TurnReply::ToolCalls(calls)) => {
                let group = match StepGroup::new(calls) {
                    Ok(group) => group,
                    Err(_) => {
                        terminated = Termination::ProtocolError;
                        break;
                    }
                };
                step_contexts.push(visible_text.clone());
                let observations: Vec<Observation> = group
                    .calls()
                    .iter()
                    .map(|call| observation_for(task, call))
                    .collect();
                let observation_text = observations
                    .iter()
                    .map(|o| serde_json::to_string(o).expect("observation serializes"))
                    .collect::<Vec<_>>()
                    .join("\n");
                visible_text.push('\n');
                visible_text.push_str(&observation_text);
                messages.push(ContextMessage::assistant_calls(group.calls().to_vec()));
                messages.push(ContextMessage::tool_results(observations));
                steps.push(TurnOutput::ToolCalls(group));
            }
            Err(_) => {
                terminated = Termination::ProtocolError;
                break;
            }
        }
    }
    let trajectory = Trajectory {
        case_id: case.id.clone(),
        task_index,
        steps,
        terminated_by: terminated,
    };
    let result = score_task(case, task, &trajectory, &step_contexts);
    TaskEvaluation {
        task_index,
        result,
        trajectory,
        transcript: messages,
    }
}

/// Scores one recorded trajectory against the task's gold annotation.
pub fn score_task(
    case: &TestCase,
    task: &Task,
    trajectory: &Trajectory,
    step_contexts: &[String],
) -> MatchResult {
    match task.gold_policy {
        PolicyType::Chat => score_text_task(trajectory, |_| true),
        PolicyType::Clarify => score_text_task(trajectory, |text| {
            let lower = text.to_lowercase();
            task.gold_clarify_params
                .iter()
                .any(|param| lower.contains(&param.to_lowercase()))
        }),
        _ => {
            let set = match enumerate_paths(&task.gold_graph) {
                Ok(set) => set,
                Err(_) => return MatchResult::protocol_failure(0.0),
            };
            let tree = build_decision_tree(&set, task.gold_graph.nodes());
            matcher::match_trajectory(
                &tree,
                trajectory,
                set.optimal_length,
                &case.tools,
                step_contexts,
            )
        }
    }
}

/// A text-gold task is correct when the agent answered with exactly one
/// accepted text turn; the single accepted answer is trivially optimal.
fn score_text_task(trajectory: &Trajectory, accept: impl Fn(&str) -> bool) -> MatchResult {
    if trajectory.terminated_by != Termination::TextEmitted {
        return MatchResult::protocol_failure(0.0);
    }
    let correct = matches!(trajectory.steps.as_slice(), [TurnOutput::Text(text)] if accept(text));
    MatchResult {
        correct,
        ap: if correct { 1.0 } else { 0.0 },
        optimal: correct,
        failure_step: if correct { None } else { Some(0) },
        error: None,
    }
}

/// Runs many cases across a worker pool. Each worker gets its own connector;
/// a case's session stays on one worker. Results come back sorted by case id
/// regardless of scheduling.
pub fn run_cases<F>(
    cases: &[TestCase],
    config: &SessionConfig,
    workers: usize,
    make_connector: F,
) -> Vec<CaseResult>
where
    F: Fn(usize) -> Box<dyn Connector> + Sync,
{
    let workers = workers.clamp(1, cases.len().max(1));
    let cursor = AtomicUsize::new(0);
    let results = Mutex::new(Vec::with_capacity(cases.len()));
    std::thread::scope(|scope| {
        for worker in 0..workers {
            let cursor = &cursor;
            let results = &results;
            let make_connector = &make_connector;
            scope.spawn(move || {
                let mut connector = make_connector(worker);
                loop {
                    let index = cursor.fetch_add(1, Ordering::SeqCst);
                    if index >= cases.len() {
                        break;
                    }
                    let result = run_case(&cases[index], config, connector.as_mut());
                    results.lock().expect("no poisoned results").push(result);
                }
            });
        }
    });
    let mut out = results.into_inner().expect("no poisoned results");
    out.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::model::{ParamSpec, ScriptedObservation, ToolSpec};
    use serde_json::json;
    use std::collections::BTreeMap;

    fn simple_tool(name: &str) -> ToolSpec {
        let mut parameters = BTreeMap::new();
        parameters.insert("location".to_string(), ParamSpec::simple("string", true));
        ToolSpec {
            name: name.into(),
            description: format!("synthetic tool {name}"),
            parameters,
        }
    }

    fn tool_task(tool: &str, location: &str, hiding: HidingStrategy) -> Task {
        let call = ToolCall::new(tool, json!({"location": location})).unwrap();
        let observation = Observation {
            status_code: 200,
            response: json!({"note": format!("OBS~{tool}~{location}")}),
        };
        Task {
            user_text: format!("Check the reading for {location}."),
            gold_policy: PolicyType::Single,
            hiding,
            gold_graph: build_graph(vec![call.clone()], &[]).unwrap(),
            gold_clarify_params: vec![],
            gold_summary: format!("The reading for {location} is nominal."),
            scripted_observations: vec![ScriptedObservation::new(&call, observation)],
        }
    }

    fn three_task_case() -> TestCase {
        TestCase {
            id: "case-3".into(),
            tools: vec![simple_tool("gauge_a"), simple_tool("gauge_b"), simple_tool("gauge_c")],
            tasks: vec![
                tool_task("gauge_a", "north", HidingStrategy::None),
                tool_task("gauge_b", "north", HidingStrategy::Omit),
                tool_task("gauge_c", "north", HidingStrategy::Reference),
            ],
            env_info: "Current time: 2024-07-12 09:00".into(),
        }
    }

    #[test]
    fn redacted_context_is_user_and_summary_pairs() {
        let case = three_task_case();
        let messages = assemble_context(&case, ChallengeMode::C2RedactedHistory, 2).unwrap();
        assert_eq!(messages.len(), 5);
        assert!(matches!(messages[0].role, Role::User));
        assert!(matches!(messages[1].role, Role::Assistant));
        assert!(messages
            .iter()
            .all(|m| !matches!(m.role, Role::ToolResult)));
        assert!(messages
            .iter()
            .all(|m| !matches!(m.body, MessageBody::ToolCalls(_))));
    }

    #[test]
    fn injected_context_adds_two_messages_per_gold_step() {
        let case = three_task_case();
        let messages = assemble_context(&case, ChallengeMode::C3InjectedHistory, 2).unwrap();
        // 5 base messages + 2 per gold step, one single-call step per prior task.
        assert_eq!(messages.len(), 5 + 2 * 2);
        assert_eq!(injected_steps(&messages).len(), 2);
    }

    #[test]
    fn first_task_context_is_a_single_user_message() {
        let case = three_task_case();
        for mode in [
            ChallengeMode::C1FullExecution,
            ChallengeMode::C2RedactedHistory,
            ChallengeMode::C3InjectedHistory,
        ] {
            let messages = assemble_context(&case, mode, 0).unwrap();
            assert_eq!(messages.len(), 1);
            assert!(matches!(messages[0].role, Role::User));
        }
    }

    #[test]
    fn observation_lookup_is_exact_and_pure() {
        let case = three_task_case();
        let task = &case.tasks[0];
        let gold = task.gold_graph.node(0);
        let hit = observation_for(task, gold);
        assert_eq!(hit.status_code, 200);
        // Repeated identical call: identical observation.
        assert_eq!(observation_for(task, gold), hit);
        // Same tool, unmatched arguments: generic 400.
        let miss_call = ToolCall::new("gauge_a", json!({"location": "elsewhere"})).unwrap();
        let miss = observation_for(task, &miss_call);
        assert_eq!(miss.status_code, 400);
        assert_eq!(miss.response["error"], "unrecognized call");
    }

    /// Replays the gold plan for any request it sees.
    struct GoldReplay {
        case: TestCase,
    }

    impl Connector for GoldReplay {
        fn exchange(&mut self, request: &TurnRequest) -> Result<TurnReply, ConnectorError> {
            let task = &self.case.tasks[request.task_index];
            let steps = gold_step_sequence(task, request.task_index).expect("gold data");
            if request.turn < steps.len() {
                Ok(TurnReply::ToolCalls(steps[request.turn].calls().to_vec()))
            } else {
                Ok(TurnReply::Text(task.gold_summary.clone()))
            }
        }
    }

    #[test]
    fn gold_replay_is_correct_in_every_mode() {
        let case = three_task_case();
        for mode in [
            ChallengeMode::C1FullExecution,
            ChallengeMode::C2RedactedHistory,
            ChallengeMode::C3InjectedHistory,
        ] {
            let mut connector = GoldReplay { case: case.clone() };
            let result = run_case(&case, &SessionConfig::new(mode), &mut connector);
            assert!(result.correct(), "mode {mode:?}");
            assert_eq!(result.ap(), 1.0);
            assert!(result.optimal());
            assert!(!result.has_protocol_error());
        }
    }

    /// Calls a nonexistent tool forever.
    struct UnknownToolAgent;

    impl Connector for UnknownToolAgent {
        fn exchange(&mut self, _request: &TurnRequest) -> Result<TurnReply, ConnectorError> {
            Ok(TurnReply::ToolCalls(vec![
                ToolCall::new("not_a_tool", json!({"x": 1})).unwrap(),
            ]))
        }
    }

    #[test]
    fn unknown_tool_gets_generic_observation_and_fails_matching() {
        let case = three_task_case();
        let mut connector = UnknownToolAgent;
        let config = SessionConfig::new(ChallengeMode::C3InjectedHistory);
        let result = run_case(&case, &config, &mut connector);
        assert!(!result.correct());
        let evaluation = &result.tasks[0];
        // The environment answered every call with the generic 400 document.
        let tool_results: Vec<_> = evaluation
            .transcript
            .iter()
            .filter(|m| matches!(m.role, Role::ToolResult))
            .collect();
        assert!(!tool_results.is_empty());
        // Budget exhaustion, since the agent never emitted text.
        assert_eq!(evaluation.trajectory.terminated_by, Termination::StepBudget);
    }

    /// Never answers with text; used for budget accounting.
    struct LoopingAgent {
        exchanges: usize,
    }

    impl Connector for LoopingAgent {
        fn exchange(&mut self, _request: &TurnRequest) -> Result<TurnReply, ConnectorError> {
            self.exchanges += 1;
            Ok(TurnReply::ToolCalls(vec![
                ToolCall::new("gauge_a", json!({"location": "north"})).unwrap(),
            ]))
        }
    }

    #[test]
    fn turn_loop_stops_within_budget_plus_one_exchanges() {
        let case = three_task_case();
        let mut config = SessionConfig::new(ChallengeMode::C2RedactedHistory);
        config.step_budget = Some(3);
        let mut connector = LoopingAgent { exchanges: 0 };
        let result = run_case(&case, &config, &mut connector);
        assert_eq!(connector.exchanges, 4);
        assert!(!result.correct());
        let evaluation = &result.tasks[0];
        assert_eq!(evaluation.trajectory.terminated_by, Termination::StepBudget);
    }

    #[test]
    fn budget_starvation_without_mismatch_is_a_protocol_error() {
        // Budget 0 lets the gold call through but never the closing text.
        let case = three_task_case();
        let mut config = SessionConfig::new(ChallengeMode::C2RedactedHistory);
        config.step_budget = Some(0);
        let mut connector = GoldReplay { case: case.clone() };
        let result = run_case(&case, &config, &mut connector);
        let evaluation = &result.tasks[0];
        assert_eq!(evaluation.trajectory.terminated_by, Termination::StepBudget);
        assert_eq!(
            evaluation.result.error,
            Some(matcher::ErrorClass::ProtocolError)
        );
        assert_eq!(evaluation.result.ap, 1.0);
        assert!(!evaluation.result.correct);
    }

    /// Emits one scripted call, then summarizes.
    struct OneCallAgent {
        call: ToolCall,
    }

    impl Connector for OneCallAgent {
        fn exchange(&mut self, request: &TurnRequest) -> Result<TurnReply, ConnectorError> {
            if request.turn == 0 {
                Ok(TurnReply::ToolCalls(vec![self.call.clone()]))
            } else {
                Ok(TurnReply::Text("done".into()))
            }
        }
    }

    #[test]
    fn bad_argument_values_classify_by_context_visibility() {
        let case = three_task_case();
        let config = SessionConfig::new(ChallengeMode::C2RedactedHistory);

        // "south" appears nowhere in the dialogue: hallucinated value.
        let mut hallucinating = OneCallAgent {
            call: ToolCall::new("gauge_c", json!({"location": "south"})).unwrap(),
        };
        let result = run_case(&case, &config, &mut hallucinating);
        assert_eq!(
            result.tasks[0].result.error,
            Some(matcher::ErrorClass::ParamValueHallucination)
        );

        // "reading" is wrong but present in the user texts: a value error.
        let mut misreading = OneCallAgent {
            call: ToolCall::new("gauge_c", json!({"location": "reading"})).unwrap(),
        };
        let result = run_case(&case, &config, &mut misreading);
        assert_eq!(
            result.tasks[0].result.error,
            Some(matcher::ErrorClass::ParamValueError)
        );

        // Unknown argument key on the right tool: a name hallucination.
        let mut misnaming = OneCallAgent {
            call: ToolCall::new("gauge_c", json!({"locaton": "north"})).unwrap(),
        };
        let result = run_case(&case, &config, &mut misnaming);
        assert_eq!(
            result.tasks[0].result.error,
            Some(matcher::ErrorClass::ParamNameHallucination)
        );
    }

    /// Always errors at the transport level.
    struct DeadConnector;

    impl Connector for DeadConnector {
        fn exchange(&mut self, _request: &TurnRequest) -> Result<TurnReply, ConnectorError> {
            Err(ConnectorError::Protocol("gone".into()))
        }
    }

    #[test]
    fn transport_failures_mark_the_case_without_aborting() {
        let case = three_task_case();
        let config = SessionConfig::new(ChallengeMode::C1FullExecution);
        let mut connector = DeadConnector;
        let result = run_case(&case, &config, &mut connector);
        assert!(!result.correct());
        assert!(result.has_protocol_error());
        assert_eq!(result.tasks.len(), 3);
    }

    #[test]
    fn worker_pool_output_is_sorted_and_complete() {
        let mut cases = Vec::new();
        for index in 0..6 {
            let mut case = three_task_case();
            case.id = format!("case-{index}");
            cases.push(case);
        }
        let config = SessionConfig::new(ChallengeMode::C3InjectedHistory);
        let results = run_cases(&cases, &config, 3, |_| {
            Box::new(GoldReplay {
                case: three_task_case(),
            }) as Box<dyn Connector>
        });
        let ids: Vec<_> = results.iter().map(|r| r.case_id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert_eq!(results.len(), 6);
        assert!(results.iter().all(CaseResult::correct));
    }
}
