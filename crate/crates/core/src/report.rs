//! Leaderboard aggregation over the three challenge runs, and report
//! rendering as JSON, CSV or markdown.
//!
//! Accuracy-like fields are fractions internally and render as percentages
//! with two decimals; the descent-direction ratio renders raw with two
//! decimals, with `inf` and `n/a` sentinels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::CaseResult;
use crate::matcher::ErrorClass;
use crate::metrics::{
    self, cross_tab, correctness_map, Ddd, GroupKey, MetricsError, ScoredCase,
};
use crate::model::ChallengeMode;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report has no rows")]
    EmptyReport,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// One evaluated agent, aggregated across the three challenge runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub label: String,
    /// Overall accuracy, taken from the injected-history run.
    pub total: f64,
    pub ap_mean: f64,
    pub op_rate: f64,
    /// Accuracy per multi-call subtype, from the full-execution run.
    pub subtype_accuracy: BTreeMap<String, f64>,
    /// Accuracy per hiding strategy, from the redacted-history run.
    pub hiding_accuracy: BTreeMap<String, f64>,
    /// Accuracy over all hiding-labelled cases (count-weighted).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hiding_total_micro: Option<f64>,
    /// Unweighted mean of the per-strategy accuracies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hiding_total_macro: Option<f64>,
    /// Accuracy per task count, from the redacted-history run.
    pub task_count_accuracy: BTreeMap<String, f64>,
    pub acc2: f64,
    pub vf: f64,
    pub ddd: Ddd,
    /// Descent direction per policy-transition count.
    pub ddd_by_ptf: BTreeMap<String, Ddd>,
    /// Distribution over classified failures, fractions of all errors.
    pub error_distribution: BTreeMap<String, f64>,
    pub c1_cases: usize,
    pub paired_cases: usize,
}

fn scored(results: &[CaseResult]) -> Vec<ScoredCase> {
    results.iter().map(CaseResult::scored).collect()
}

fn accuracy_by_group(
    cases: &[ScoredCase],
    key: GroupKey,
) -> Result<BTreeMap<String, f64>, MetricsError> {
    Ok(metrics::group_metrics(cases, key)?
        .into_iter()
        .map(|(label, report)| (label, report.accuracy))
        .collect())
}

/// Builds one leaderboard row from the three challenge runs.
///
/// The redacted- and injected-history runs must cover the same case ids; the
/// full-execution run may use its own corpus.
pub fn build_row(
    c1: &[CaseResult],
    c2: &[CaseResult],
    c3: &[CaseResult],
    label: &str,
) -> Result<LeaderboardRow, ReportError> {
    let c1_scored = scored(c1);
    let c2_scored = scored(c2);
    let c3_scored = scored(c3);

    let c1_report = metrics::compute_report(&c1_scored);
    let c3_report = metrics::compute_report(&c3_scored);

    let with_subtype: Vec<ScoredCase> = c1_scored
        .iter()
        .filter(|case| case.labels.subtype.is_some())
        .cloned()
        .collect();
    let subtype_accuracy = accuracy_by_group(&with_subtype, GroupKey::MultiSubtype)?;

    let with_hiding: Vec<ScoredCase> = c2_scored
        .iter()
        .filter(|case| case.labels.hiding.is_some())
        .cloned()
        .collect();
    let hiding_accuracy = accuracy_by_group(&with_hiding, GroupKey::Hiding)?;
    let hiding_total_micro = (!with_hiding.is_empty())
        .then(|| metrics::compute_report(&with_hiding).accuracy);
    let hiding_total_macro = (!hiding_accuracy.is_empty())
        .then(|| hiding_accuracy.values().sum::<f64>() / hiding_accuracy.len() as f64);

    let task_count_accuracy = accuracy_by_group(&c2_scored, GroupKey::TaskCount)?;

    let tab = cross_tab(&correctness_map(&c2_scored), &correctness_map(&c3_scored))?;
    let acc2 = metrics::acc2(&tab)?;
    let vf = metrics::vf(&tab)?;
    let ddd = metrics::ddd(&tab)?;

    let mut ddd_by_ptf = BTreeMap::new();
    let ptf_values: std::collections::BTreeSet<usize> =
        c2_scored.iter().map(|case| case.labels.ptf).collect();
    for ptf in ptf_values {
        let subset_c2: Vec<ScoredCase> = c2_scored
            .iter()
            .filter(|case| case.labels.ptf == ptf)
            .cloned()
            .collect();
        let ids: std::collections::BTreeSet<&str> =
            subset_c2.iter().map(|case| case.case_id.as_str()).collect();
        let subset_c3: Vec<ScoredCase> = c3_scored
            .iter()
            .filter(|case| ids.contains(case.case_id.as_str()))
            .cloned()
            .collect();
        let subset_tab = cross_tab(&correctness_map(&subset_c2), &correctness_map(&subset_c3))?;
        ddd_by_ptf.insert(ptf.to_string(), metrics::ddd(&subset_tab)?);
    }

    let mut error_counts: BTreeMap<ErrorClass, u64> = BTreeMap::new();
    for result in c3 {
        for task in &result.tasks {
            if let Some(error) = task.result.error {
                *error_counts.entry(error).or_default() += 1;
            }
        }
    }
    let total_errors: u64 = error_counts.values().sum();
    let error_distribution = error_counts
        .into_iter()
        .map(|(class, count)| {
            (
                class.label().to_string(),
                count as f64 / total_errors.max(1) as f64,
            )
        })
        .collect();

    Ok(LeaderboardRow {
        label: label.to_string(),
        total: c3_report.accuracy,
        ap_mean: c1_report.ap_mean,
        op_rate: c1_report.op_rate,
        subtype_accuracy,
        hiding_accuracy,
        hiding_total_micro,
        hiding_total_macro,
        task_count_accuracy,
        acc2,
        vf,
        ddd,
        ddd_by_ptf,
        error_distribution,
        c1_cases: c1.len(),
        paired_cases: c2.len(),
    })
}

/// Output encodings for leaderboard rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

fn pct(value: f64) -> String {
    format!("{:.2}", value * 100.0)
}

fn pct_opt(value: Option<&f64>) -> String {
    value.map(|v| pct(*v)).unwrap_or_else(|| "n/a".to_string())
}

const SUBTYPE_KEYS: [&str; 3] = ["multi_parallel", "multi_serial", "multi_mixed"];
const HIDING_KEYS: [&str; 3] = ["omit", "reference", "long_context"];
const TASK_COUNT_KEYS: [&str; 4] = ["1", "2", "3", "4"];
const PTF_KEYS: [&str; 4] = ["0", "1", "2", "3"];

/// Renders rows in the requested format. Output is byte-stable for equal
/// input.
pub fn emit(rows: &[LeaderboardRow], format: ReportFormat) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::EmptyReport);
    }
    Ok(match format {
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(rows).expect("rows serialize");
            text.push('\n');
            text
        }
        ReportFormat::Csv => emit_csv(rows),
        ReportFormat::Markdown => emit_markdown(rows),
    })
}

fn csv_columns() -> Vec<String> {
    let mut columns = vec![
        "label".to_string(),
        "total".to_string(),
        "multi_parallel".to_string(),
        "multi_serial".to_string(),
        "multi_mixed".to_string(),
        "ap".to_string(),
        "op_rate".to_string(),
        "omit".to_string(),
        "reference".to_string(),
        "long_context".to_string(),
        "hiding_micro".to_string(),
        "hiding_macro".to_string(),
    ];
    columns.extend(TASK_COUNT_KEYS.iter().map(|k| format!("tasks_{k}")));
    columns.extend(["acc2".to_string(), "vf".to_string(), "ddd".to_string()]);
    columns.extend(PTF_KEYS.iter().map(|k| format!("ddd_ptf_{k}")));
    columns.extend(ErrorClass::ALL.iter().map(|c| format!("err_{}", c.label())));
    columns
}

fn emit_csv(rows: &[LeaderboardRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(csv_columns()).expect("write header");
    for row in rows {
        let mut record: Vec<String> = vec![row.label.clone(), pct(row.total)];
        for key in SUBTYPE_KEYS {
            record.push(pct_opt(row.subtype_accuracy.get(key)));
        }
        record.push(pct(row.ap_mean));
        record.push(pct(row.op_rate));
        for key in HIDING_KEYS {
            record.push(pct_opt(row.hiding_accuracy.get(key)));
        }
        record.push(pct_opt(row.hiding_total_micro.as_ref()));
        record.push(pct_opt(row.hiding_total_macro.as_ref()));
        for key in TASK_COUNT_KEYS {
            record.push(pct_opt(row.task_count_accuracy.get(key)));
        }
        record.push(pct(row.acc2));
        record.push(pct(row.vf));
        record.push(row.ddd.render(2));
        for key in PTF_KEYS {
            record.push(
                row.ddd_by_ptf
                    .get(key)
                    .map(|d| d.render(2))
                    .unwrap_or_else(|| "n/a".to_string()),
            );
        }
        for class in ErrorClass::ALL {
            record.push(pct_opt(row.error_distribution.get(class.label())));
        }
        writer.write_record(record).expect("write row");
    }
    String::from_utf8(writer.into_inner().expect("flush csv")).expect("csv is utf-8")
}

fn markdown_table(header: &[&str], body: Vec<Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!(
        "|{}\n",
        header.iter().map(|_| " --- |").collect::<String>()
    ));
    for row in body {
        out.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    out
}

fn emit_markdown(rows: &[LeaderboardRow]) -> String {
    let mut out = String::new();
    out.push_str("## Multi-call accuracy, progress and efficiency\n\n");
    out.push_str(&markdown_table(
        &["Agent", "Total", "Parallel", "Serial", "Mixed", "AP", "OP Rate"],
        rows.iter()
            .map(|row| {
                let mut cells = vec![row.label.clone(), pct(row.total)];
                for key in SUBTYPE_KEYS {
                    cells.push(pct_opt(row.subtype_accuracy.get(key)));
                }
                cells.push(pct(row.ap_mean));
                cells.push(pct(row.op_rate));
                cells
            })
            .collect(),
    ));
    out.push_str("\n## Hidden-information accuracy\n\n");
    out.push_str(&markdown_table(
        &["Agent", "Omit", "Ref", "Long", "Micro", "Macro"],
        rows.iter()
            .map(|row| {
                let mut cells = vec![row.label.clone()];
                for key in HIDING_KEYS {
                    cells.push(pct_opt(row.hiding_accuracy.get(key)));
                }
                cells.push(pct_opt(row.hiding_total_micro.as_ref()));
                cells.push(pct_opt(row.hiding_total_macro.as_ref()));
                cells
            })
            .collect(),
    ));
    out.push_str("\n## Robustness across paired runs\n\n");
    out.push_str(&markdown_table(
        &["Agent", "Acc2", "VF", "DDD"],
        rows.iter()
            .map(|row| {
                vec![
                    row.label.clone(),
                    pct(row.acc2),
                    pct(row.vf),
                    row.ddd.render(2),
                ]
            })
            .collect(),
    ));
    out.push_str("\n## Descent direction by policy-transition count\n\n");
    out.push_str(&markdown_table(
        &["Agent", "PTF 0", "PTF 1", "PTF 2", "PTF 3"],
        rows.iter()
            .map(|row| {
                let mut cells = vec![row.label.clone()];
                for key in PTF_KEYS {
                    cells.push(
                        row.ddd_by_ptf
                            .get(key)
                            .map(|d| d.render(2))
                            .unwrap_or_else(|| "n/a".to_string()),
                    );
                }
                cells
            })
            .collect(),
    ));
    out.push_str("\n## Error distribution\n\n");
    out.push_str(&markdown_table(
        &["Agent", "Tool", "Name Hallu.", "Value Hallu.", "Value Err", "Protocol"],
        rows.iter()
            .map(|row| {
                let mut cells = vec![row.label.clone()];
                for class in ErrorClass::ALL {
                    cells.push(pct_opt(row.error_distribution.get(class.label())));
                }
                cells
            })
            .collect(),
    ));
    out
}

/// One persisted evaluation run: everything `eval` writes to disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRun {
    pub mode: ChallengeMode,
    pub seed: u64,
    pub connector: String,
    pub cases: Vec<CaseResult>,
}
