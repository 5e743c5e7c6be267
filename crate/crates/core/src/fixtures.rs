//! Deterministic skeleton test cases covering the policy-switch space, and
//! scripted mock agents for end-to-end testing.
//!
//! Generated content is template text around unique sentinel tokens: place
//! values like `Bryndholm-07f3` carry hidden information through dialogue,
//! `ref-…` identifiers flow from observations into dependent gold calls, and
//! every scripted observation embeds an `OBS~…` token so redaction checks
//! are a plain substring scan.

use std::collections::BTreeMap;
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use crate::graph::build_graph;
use crate::harness::{gold_step_sequence, Connector, ConnectorError, TurnReply, TurnRequest};
use crate::model::{
    CoarsePolicy, HidingStrategy, Observation, ParamSpec, PolicyType, ScriptedObservation,
    StepGroup, Task, TestCase, ToolCall, ToolSpec,
};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FixtureError {
    #[error("policy combinations are defined for 1..=4 tasks, got {0}")]
    InvalidLength(usize),
    #[error("invalid hiding plan: {0}")]
    InvalidPlan(String),
}

/// Marker prefix present in every scripted observation and nowhere else.
pub const OBSERVATION_SENTINEL: &str = "OBS~";

/// An ordered assignment of coarse policy types to tasks.
pub type PolicyCombination = Vec<CoarsePolicy>;

/// All `4^n` ordered coarse-policy combinations, lexicographic in the order
/// single < multi < chat < clarify.
pub fn enumerate_policy_combinations(n: usize) -> Result<Vec<PolicyCombination>, FixtureError> {
    if n == 0 || n > 4 {
        return Err(FixtureError::InvalidLength(n));
    }
    let mut combos = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(combos.len() * 4);
        for combo in &combos {
            for policy in CoarsePolicy::ALL {
                let mut extended = combo.clone();
                extended.push(policy);
                next.push(extended);
            }
        }
        combos = next;
    }
    Ok(combos)
}

const PLACE_STEMS: [&str; 16] = [
    "Ardenvale", "Brynholt", "Corvayne", "Duskmere", "Eldermoor", "Fennwick", "Galdoria",
    "Hartvale", "Ilsbrook", "Jorwick", "Kestrelmoor", "Lunden", "Morvale", "Nortcliff",
    "Ostermere", "Pellbrook",
];

const METRICS: [&str; 8] = [
    "weather outlook",
    "traffic density",
    "air quality",
    "noise level",
    "power load",
    "water table",
    "soil moisture",
    "wind exposure",
];

fn fresh_place(rng: &mut ChaCha8Rng) -> String {
    let stem = PLACE_STEMS[rng.random_range(0..PLACE_STEMS.len())];
    format!("{stem}-{:04x}", rng.random_range(0u32..0x10000))
}

fn fresh_ref(rng: &mut ChaCha8Rng) -> String {
    format!("ref-{:08x}", rng.random_range(0u64..0x1_0000_0000))
}

fn obs_token(rng: &mut ChaCha8Rng) -> String {
    format!("{OBSERVATION_SENTINEL}{:08x}", rng.random_range(0u64..0x1_0000_0000))
}

fn metric(rng: &mut ChaCha8Rng) -> &'static str {
    METRICS[rng.random_range(0..METRICS.len())]
}

fn location_param() -> BTreeMap<String, ParamSpec> {
    let mut parameters = BTreeMap::new();
    parameters.insert("location".to_string(), ParamSpec::simple("string", true));
    parameters.insert(
        "detail_level".to_string(),
        ParamSpec {
            type_tag: "enum".into(),
            required: false,
            values: Some(vec![json!("summary"), json!("full")]),
            items: None,
            fields: None,
        },
    );
    parameters
}

fn hiding_clause(hiding: HidingStrategy, value: &str) -> String {
    match hiding {
        HidingStrategy::None => format!("for {value}"),
        HidingStrategy::Omit => String::new(),
        HidingStrategy::Reference => "there".to_string(),
        HidingStrategy::LongContext => "for the first place I mentioned".to_string(),
    }
}

struct TaskDraft {
    task: Task,
    tools: Vec<ToolSpec>,
}

fn single_task(
    index: usize,
    hiding: HidingStrategy,
    value: &str,
    rng: &mut ChaCha8Rng,
) -> TaskDraft {
    let topic = metric(rng);
    let tool_name = format!("read_{}_{index}", topic.split(' ').next().unwrap());
    let tool = ToolSpec {
        name: tool_name.clone(),
        description: format!("Reads the current {topic} for a location."),
        parameters: location_param(),
    };
    let call = ToolCall::new(&tool_name, json!({ "location": value })).unwrap();
    let observation = Observation {
        status_code: 200,
        response: json!({ "reading": "nominal", "trace": obs_token(rng) }),
    };
    let clause = hiding_clause(hiding, value);
    let user_text = match hiding {
        HidingStrategy::None => format!("Please check the {topic} {clause}."),
        HidingStrategy::Omit => format!("Now check the {topic} as well."),
        _ => format!("Please check the {topic} {clause}."),
    };
    TaskDraft {
        task: Task {
            user_text,
            gold_policy: PolicyType::Single,
            hiding,
            gold_graph: build_graph(vec![call.clone()], &[]).unwrap(),
            gold_clarify_params: vec![],
            gold_summary: format!("The {topic} for {value} is within the normal range."),
            scripted_observations: vec![ScriptedObservation::new(&call, observation)],
        },
        tools: vec![tool],
    }
}

fn parallel_task(
    index: usize,
    hiding: HidingStrategy,
    value: &str,
    rng: &mut ChaCha8Rng,
) -> TaskDraft {
    let topic_a = metric(rng);
    let mut topic_b = metric(rng);
    while topic_b == topic_a {
        topic_b = metric(rng);
    }
    let name_a = format!("scan_{}_{index}", topic_a.split(' ').next().unwrap());
    let name_b = format!("probe_{}_{index}", topic_b.split(' ').next().unwrap());
    let tools = vec![
        ToolSpec {
            name: name_a.clone(),
            description: format!("Scans the {topic_a} for a location."),
            parameters: location_param(),
        },
        ToolSpec {
            name: name_b.clone(),
            description: format!("Probes the {topic_b} for a location."),
            parameters: location_param(),
        },
    ];
    let call_a = ToolCall::new(&name_a, json!({ "location": value })).unwrap();
    let call_b = ToolCall::new(&name_b, json!({ "location": value })).unwrap();
    let observations = vec![
        ScriptedObservation::new(
            &call_a,
            Observation {
                status_code: 200,
                response: json!({ "level": "stable", "trace": obs_token(rng) }),
            },
        ),
        ScriptedObservation::new(
            &call_b,
            Observation {
                status_code: 200,
                response: json!({ "level": "steady", "trace": obs_token(rng) }),
            },
        ),
    ];
    let clause = hiding_clause(hiding, value);
    let user_text = if clause.is_empty() {
        format!("Compare the {topic_a} with the {topic_b} as well.")
    } else {
        format!("Compare the {topic_a} with the {topic_b} {clause}.")
    };
    TaskDraft {
        task: Task {
            user_text,
            gold_policy: PolicyType::MultiParallel,
            hiding,
            gold_graph: build_graph(vec![call_a, call_b], &[]).unwrap(),
            gold_clarify_params: vec![],
            gold_summary: format!(
                "For {value}, the {topic_a} and the {topic_b} are both stable right now."
            ),
            scripted_observations: observations,
        },
        tools,
    }
}

fn serial_task(
    index: usize,
    hiding: HidingStrategy,
    value: &str,
    rng: &mut ChaCha8Rng,
) -> TaskDraft {
    let topic = metric(rng);
    let record_id = fresh_ref(rng);
    let fetch_name = format!("fetch_{}_record_{index}", topic.split(' ').next().unwrap());
    let archive_name = format!("archive_record_{index}");
    let mut archive_params = BTreeMap::new();
    archive_params.insert("record_id".to_string(), ParamSpec::simple("id", true));
    let tools = vec![
        ToolSpec {
            name: fetch_name.clone(),
            description: format!("Fetches the latest {topic} record for a location."),
            parameters: location_param(),
        },
        ToolSpec {
            name: archive_name.clone(),
            description: "Archives a record by its identifier.".into(),
            parameters: archive_params,
        },
    ];
    let fetch = ToolCall::new(&fetch_name, json!({ "location": value })).unwrap();
    let archive = ToolCall::new(&archive_name, json!({ "record_id": record_id })).unwrap();
    let observations = vec![
        ScriptedObservation::new(
            &fetch,
            Observation {
                status_code: 200,
                response: json!({ "record_id": record_id, "trace": obs_token(rng) }),
            },
        ),
        ScriptedObservation::new(
            &archive,
            Observation {
                status_code: 200,
                response: json!({ "archived": true, "trace": obs_token(rng) }),
            },
        ),
    ];
    let clause = hiding_clause(hiding, value);
    let user_text = if clause.is_empty() {
        format!("Pull the latest {topic} record and archive it too.")
    } else {
        format!("Pull the latest {topic} record {clause} and archive it.")
    };
    TaskDraft {
        task: Task {
            user_text,
            gold_policy: PolicyType::MultiSerial,
            hiding,
            gold_graph: build_graph(vec![fetch, archive], &[(0, 1)]).unwrap(),
            gold_clarify_params: vec![],
            gold_summary: format!("Retrieved the {topic} record for {value} and archived it."),
            scripted_observations: observations,
        },
        tools,
    }
}

/// Four calls wired like the running example: [2] needs [1], [3] needs both
/// [0] and [2].
fn mixed_task(
    index: usize,
    hiding: HidingStrategy,
    value: &str,
    rng: &mut ChaCha8Rng,
) -> TaskDraft {
    let topic = metric(rng);
    let workspace_id = fresh_ref(rng);
    let entry_id = fresh_ref(rng);
    let detail_code = fresh_ref(rng);
    let open_name = format!("open_workspace_{index}");
    let list_name = format!("list_{}_entries_{index}", topic.split(' ').next().unwrap());
    let details_name = format!("fetch_entry_details_{index}");
    let compose_name = format!("compose_briefing_{index}");

    let mut title_params = BTreeMap::new();
    title_params.insert("title".to_string(), ParamSpec::simple("string", true));
    let mut details_params = BTreeMap::new();
    details_params.insert("entry_id".to_string(), ParamSpec::simple("id", true));
    let mut compose_params = BTreeMap::new();
    compose_params.insert("workspace_id".to_string(), ParamSpec::simple("id", true));
    compose_params.insert("detail_code".to_string(), ParamSpec::simple("id", true));
    compose_params.insert(
        "sections".to_string(),
        ParamSpec {
            type_tag: "array".into(),
            required: false,
            values: None,
            items: Some(Box::new(ParamSpec::simple("string", false))),
            fields: None,
        },
    );

    let tools = vec![
        ToolSpec {
            name: open_name.clone(),
            description: "Opens a fresh working document and returns its identifier.".into(),
            parameters: title_params,
        },
        ToolSpec {
            name: list_name.clone(),
            description: format!("Lists {topic} entries recorded for a location."),
            parameters: location_param(),
        },
        ToolSpec {
            name: details_name.clone(),
            description: "Fetches detailed figures for one entry.".into(),
            parameters: details_params,
        },
        ToolSpec {
            name: compose_name.clone(),
            description: "Composes the final briefing inside a workspace.".into(),
            parameters: compose_params,
        },
    ];

    let open = ToolCall::new(&open_name, json!({ "title": format!("{topic} briefing") })).unwrap();
    let list = ToolCall::new(&list_name, json!({ "location": value })).unwrap();
    let details = ToolCall::new(&details_name, json!({ "entry_id": entry_id })).unwrap();
    let compose = ToolCall::new(
        &compose_name,
        json!({ "workspace_id": workspace_id, "detail_code": detail_code }),
    )
    .unwrap();

    let observations = vec![
        ScriptedObservation::new(
            &open,
            Observation {
                status_code: 200,
                response: json!({ "workspace_id": workspace_id, "trace": obs_token(rng) }),
            },
        ),
        ScriptedObservation::new(
            &list,
            Observation {
                status_code: 200,
                response: json!({ "entry_id": entry_id, "trace": obs_token(rng) }),
            },
        ),
        ScriptedObservation::new(
            &details,
            Observation {
                status_code: 200,
                response: json!({ "detail_code": detail_code, "trace": obs_token(rng) }),
            },
        ),
        ScriptedObservation::new(
            &compose,
            Observation {
                status_code: 200,
                response: json!({ "briefing": "ready", "trace": obs_token(rng) }),
            },
        ),
    ];

    let clause = hiding_clause(hiding, value);
    let user_text = if clause.is_empty() {
        format!("Prepare a {topic} briefing from the latest entries as well.")
    } else {
        format!("Prepare a {topic} briefing {clause} from the latest entries.")
    };
    TaskDraft {
        task: Task {
            user_text,
            gold_policy: PolicyType::MultiMixed,
            hiding,
            gold_graph: build_graph(vec![open, list, details, compose], &[(1, 2), (0, 3), (2, 3)])
                .unwrap(),
            gold_clarify_params: vec![],
            gold_summary: format!("Compiled the {topic} briefing for {value}; the workspace is ready."),
            scripted_observations: observations,
        },
        tools,
    }
}

fn chat_task(hiding: HidingStrategy, value: &str, rng: &mut ChaCha8Rng) -> TaskDraft {
    let topic = metric(rng);
    let clause = hiding_clause(hiding, value);
    let user_text = match hiding {
        HidingStrategy::None => format!(
            "In general, what should I keep in mind about {topic} readings {clause}?"
        ),
        HidingStrategy::Omit => format!("What should I generally watch for in the {topic}?"),
        _ => format!("What should I keep in mind about the {topic} {clause}?"),
    };
    TaskDraft {
        task: Task {
            user_text,
            gold_policy: PolicyType::Chat,
            hiding,
            gold_graph: crate::graph::DependencyGraph::empty(),
            gold_clarify_params: vec![],
            gold_summary: format!(
                "Broadly speaking, {topic} readings around {value} vary by season; watch for abrupt shifts."
            ),
            scripted_observations: vec![],
        },
        tools: vec![],
    }
}

fn clarify_task(index: usize, hiding: HidingStrategy, value: &str) -> TaskDraft {
    let tool_name = format!("archive_inspection_{index}");
    let mut parameters = location_param();
    parameters.insert("record_code".to_string(), ParamSpec::simple("id", true));
    let tool = ToolSpec {
        name: tool_name,
        description: "Archives an inspection record; requires its record code.".into(),
        parameters,
    };
    let clause = hiding_clause(hiding, value);
    let user_text = if clause.is_empty() {
        "Also archive the inspection record.".to_string()
    } else {
        format!("Please archive the inspection record {clause}.")
    };
    TaskDraft {
        task: Task {
            user_text,
            gold_policy: PolicyType::Clarify,
            hiding,
            gold_graph: crate::graph::DependencyGraph::empty(),
            gold_clarify_params: vec!["record_code".to_string()],
            gold_summary: format!(
                "Could you provide the record_code of the inspection record near {value} so I can archive it?"
            ),
            scripted_observations: vec![],
        },
        tools: vec![tool],
    }
}

fn validate_plan(len: usize, hiding_plan: &[HidingStrategy]) -> Result<(), FixtureError> {
    if hiding_plan.len() != len {
        return Err(FixtureError::InvalidPlan(format!(
            "plan length {} does not match {} tasks",
            hiding_plan.len(),
            len
        )));
    }
    if hiding_plan[0] != HidingStrategy::None {
        return Err(FixtureError::InvalidPlan(
            "the first task cannot hide information".into(),
        ));
    }
    for (index, hiding) in hiding_plan.iter().enumerate() {
        if *hiding == HidingStrategy::LongContext && index < 2 {
            return Err(FixtureError::InvalidPlan(format!(
                "long-context hiding needs at least two prior tasks, found at index {index}"
            )));
        }
    }
    Ok(())
}

/// Generates a case with explicit fine-grained policies per task.
pub fn generate_case_with_subtypes(
    policies: &[PolicyType],
    hiding_plan: &[HidingStrategy],
    seed: u64,
) -> Result<TestCase, FixtureError> {
    if policies.is_empty() || policies.len() > 4 {
        return Err(FixtureError::InvalidLength(policies.len()));
    }
    validate_plan(policies.len(), hiding_plan)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tools = Vec::new();
    let mut tasks = Vec::new();
    // The hidden value each task consumes: fresh when stated outright,
    // otherwise inherited from the previous task or the first one.
    let mut consumed: Vec<String> = Vec::new();
    for (index, (&policy, &hiding)) in policies.iter().zip(hiding_plan).enumerate() {
        let value = match hiding {
            HidingStrategy::None => fresh_place(&mut rng),
            HidingStrategy::Omit | HidingStrategy::Reference => consumed[index - 1].clone(),
            HidingStrategy::LongContext => consumed[0].clone(),
        };
        let draft = match policy {
            PolicyType::Single => single_task(index, hiding, &value, &mut rng),
            PolicyType::MultiParallel => parallel_task(index, hiding, &value, &mut rng),
            PolicyType::MultiSerial => serial_task(index, hiding, &value, &mut rng),
            PolicyType::MultiMixed => mixed_task(index, hiding, &value, &mut rng),
            PolicyType::Chat => chat_task(hiding, &value, &mut rng),
            PolicyType::Clarify => clarify_task(index, hiding, &value),
        };
        consumed.push(value);
        tools.extend(draft.tools);
        tasks.push(draft.task);
    }
    let combo_code: String = policies.iter().map(|p| p.coarse().code()).collect();
    let plan_code: String = hiding_plan
        .iter()
        .map(|h| match h {
            HidingStrategy::None => 'n',
            HidingStrategy::Omit => 'o',
            HidingStrategy::Reference => 'r',
            HidingStrategy::LongContext => 'l',
        })
        .collect();
    let case = TestCase {
        id: format!("{}t-{combo_code}-{plan_code}-{seed:016x}", policies.len()),
        tools,
        tasks,
        env_info: "Current time: 2024-07-12 09:00:00".into(),
    };
    case.validate().expect("generated cases satisfy the schema");
    Ok(case)
}

/// Generates a deterministic skeleton case for a coarse policy combination.
///
/// Multi slots draw a subtype from the seeded stream; graph shapes follow the
/// subtype (one node, two independent nodes, a two-chain, or the four-node
/// mixed shape).
pub fn generate_case(
    combo: &[CoarsePolicy],
    hiding_plan: &[HidingStrategy],
    seed: u64,
) -> Result<TestCase, FixtureError> {
    if combo.is_empty() || combo.len() > 4 {
        return Err(FixtureError::InvalidLength(combo.len()));
    }
    let mut subtype_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5_a5a5_a5a5_a5a5);
    let policies: Vec<PolicyType> = combo
        .iter()
        .map(|coarse| match coarse {
            CoarsePolicy::Single => PolicyType::Single,
            CoarsePolicy::Chat => PolicyType::Chat,
            CoarsePolicy::Clarify => PolicyType::Clarify,
            CoarsePolicy::Multi => [
                PolicyType::MultiParallel,
                PolicyType::MultiSerial,
                PolicyType::MultiMixed,
            ][subtype_rng.random_range(0..3)],
        })
        .collect();
    generate_case_with_subtypes(&policies, hiding_plan, seed)
}

/// Default hiding plan: the first task states its value, later tasks draw
/// from the strategies feasible at their position.
pub fn default_hiding_plan(n: usize, seed: u64) -> Vec<HidingStrategy> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a_5a5a_5a5a_5a5a);
    (0..n)
        .map(|index| match index {
            0 => HidingStrategy::None,
            1 => [HidingStrategy::Omit, HidingStrategy::Reference][rng.random_range(0..2)],
            _ => [
                HidingStrategy::Omit,
                HidingStrategy::Reference,
                HidingStrategy::LongContext,
            ][rng.random_range(0..3)],
        })
        .collect()
}

fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut x = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x
}

/// One case per policy combination for each requested task count; the
/// classic switch-space corpus uses task counts 2, 3 and 4 (336 cases).
pub fn generate_switch_corpus(
    task_counts: &[usize],
    per_combo: usize,
    seed: u64,
) -> Result<Vec<TestCase>, FixtureError> {
    let mut cases = Vec::new();
    for &n in task_counts {
        let combos = enumerate_policy_combinations(n)?;
        for (combo_index, combo) in combos.iter().enumerate() {
            for k in 0..per_combo.max(1) {
                let case_seed = mix_seed(
                    seed,
                    (n as u64) << 40 | (combo_index as u64) << 8 | k as u64,
                );
                let plan = default_hiding_plan(n, case_seed);
                cases.push(generate_case(combo, &plan, case_seed)?);
            }
        }
    }
    Ok(cases)
}

/// Scripted agent behaviors for exercising the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockAgentKind {
    /// Replays the gold plan and summary for every task.
    Perfect,
    /// Replays gold but splits every parallel group into singleton steps.
    SerializeParallel,
    /// Corrupts one call's tool name in the last tool-bearing task.
    WrongTool(u64),
    /// Answers the final task as if hidden values were unknown, asking the
    /// user to repeat them.
    DropHiddenInfo(u64),
}

/// In-process connector backed by a corpus and a scripted behavior.
pub struct MockConnector {
    kind: MockAgentKind,
    cases: BTreeMap<String, TestCase>,
}

/// Builds a connector-compatible scripted agent over `corpus`.
pub fn mock_agent(kind: MockAgentKind, corpus: &[TestCase]) -> MockConnector {
    MockConnector {
        kind,
        cases: corpus
            .iter()
            .map(|case| (case.id.clone(), case.clone()))
            .collect(),
    }
}

fn stable_hash(text: &str) -> u64 {
    let mut hasher = DefaultHasher::new();
    text.hash(&mut hasher);
    hasher.finish()
}

impl MockConnector {
    fn plan_for(&self, case: &TestCase, task_index: usize) -> Vec<StepGroup> {
        let task = &case.tasks[task_index];
        let gold = gold_step_sequence(task, task_index).unwrap_or_default();
        match self.kind {
            MockAgentKind::Perfect | MockAgentKind::DropHiddenInfo(_) => gold,
            MockAgentKind::SerializeParallel => gold
                .iter()
                .flat_map(|group| group.calls().iter().cloned().map(StepGroup::single))
                .collect(),
            MockAgentKind::WrongTool(seed) => {
                let target = case
                    .tasks
                    .iter()
                    .rposition(|t| t.gold_call_count() > 0);
                if target != Some(task_index) || gold.is_empty() {
                    return gold;
                }
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ stable_hash(&case.id));
                let step = rng.random_range(0..gold.len());
                let call = rng.random_range(0..gold[step].len());
                gold.iter()
                    .enumerate()
                    .map(|(s, group)| {
                        if s != step {
                            return group.clone();
                        }
                        let calls: Vec<ToolCall> = group
                            .calls()
                            .iter()
                            .enumerate()
                            .map(|(c, original)| {
                                if c == call {
                                    ToolCall::new(
                                        format!("phantom_{}", original.tool),
                                        original.arguments.clone(),
                                    )
                                    .unwrap()
                                } else {
                                    original.clone()
                                }
                            })
                            .collect();
                        StepGroup::new(calls).unwrap()
                    })
                    .collect()
            }
        }
    }

    fn drops_this_task(&self, case: &TestCase, task_index: usize) -> bool {
        matches!(self.kind, MockAgentKind::DropHiddenInfo(_))
            && task_index == case.tasks.len() - 1
            && case.tasks[task_index].hiding != HidingStrategy::None
    }
}

impl Connector for MockConnector {
    fn exchange(&mut self, request: &TurnRequest) -> Result<TurnReply, ConnectorError> {
        let case = self
            .cases
            .get(&request.case_id)
            .ok_or_else(|| ConnectorError::Protocol(format!("unknown case `{}`", request.case_id)))?
            .clone();
        let task = case
            .tasks
            .get(request.task_index)
            .ok_or_else(|| ConnectorError::Protocol("task index out of range".into()))?;
        if self.drops_this_task(&case, request.task_index) {
            let seed = match self.kind {
                MockAgentKind::DropHiddenInfo(seed) => seed,
                _ => unreachable!(),
            };
            let phrasings = [
                "Could you repeat which place you mean? I do not see it in the current request.",
                "I am missing the location this refers to; please state it again.",
            ];
            let pick = (seed ^ stable_hash(&case.id)) as usize % phrasings.len();
            return Ok(TurnReply::Text(phrasings[pick].to_string()));
        }
        let plan = self.plan_for(&case, request.task_index);
        if request.turn < plan.len() {
            Ok(TurnReply::ToolCalls(plan[request.turn].calls().to_vec()))
        } else {
            Ok(TurnReply::Text(task.gold_summary.clone()))
        }
    }
}
