//! Robustness metrics: policy transition frequency, paired-challenge
//! cross-tabs and their derived scores, and grouped aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CoarsePolicy, HidingStrategy, PolicyType};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("policy sequence is empty")]
    EmptySequence,
    #[error("correctness maps carry different case-id sets")]
    KeySetMismatch,
    #[error("cross-tab has no entries")]
    EmptyTab,
    #[error("case `{case_id}` lacks the `{selector}` label")]
    MissingLabel {
        case_id: String,
        selector: &'static str,
    },
}

/// Number of adjacent policy-type switches in a task sequence.
pub fn ptf(seq: &[CoarsePolicy]) -> Result<usize, MetricsError> {
    if seq.is_empty() {
        return Err(MetricsError::EmptySequence);
    }
    Ok(seq.windows(2).filter(|pair| pair[0] != pair[1]).count())
}

/// Paired correctness outcomes of the same cases under two challenges.
///
/// `rw` counts cases right in the first challenge and wrong in the second;
/// `wr` is the opposite flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CrossTab {
    pub rr: u64,
    pub rw: u64,
    pub wr: u64,
    pub ww: u64,
}

impl CrossTab {
    pub fn new(rr: u64, rw: u64, wr: u64, ww: u64) -> Self {
        Self { rr, rw, wr, ww }
    }

    pub fn total(&self) -> u64 {
        self.rr + self.rw + self.wr + self.ww
    }
}

/// Pairs two per-case correctness maps into a cross-tab.
pub fn cross_tab(
    first: &BTreeMap<String, bool>,
    second: &BTreeMap<String, bool>,
) -> Result<CrossTab, MetricsError> {
    if first.len() != second.len() || !first.keys().eq(second.keys()) {
        return Err(MetricsError::KeySetMismatch);
    }
    let mut tab = CrossTab::default();
    for (case_id, &a) in first {
        let b = second[case_id];
        match (a, b) {
            (true, true) => tab.rr += 1,
            (true, false) => tab.rw += 1,
            (false, true) => tab.wr += 1,
            (false, false) => tab.ww += 1,
        }
    }
    Ok(tab)
}

/// Joint accuracy over the paired challenges: RR / total.
pub fn acc2(tab: &CrossTab) -> Result<f64, MetricsError> {
    if tab.total() == 0 {
        return Err(MetricsError::EmptyTab);
    }
    Ok(tab.rr as f64 / tab.total() as f64)
}

/// Volatility factor: fraction of cases whose correctness flipped.
pub fn vf(tab: &CrossTab) -> Result<f64, MetricsError> {
    if tab.total() == 0 {
        return Err(MetricsError::EmptyTab);
    }
    Ok((tab.wr + tab.rw) as f64 / tab.total() as f64)
}

/// Debiased descent direction: the RW/WR flip ratio scaled by 1/Acc2.
///
/// The sentinel values cover the divisions the formula leaves open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ddd {
    Finite(f64),
    Infinite,
    Undefined,
}

impl Ddd {
    pub fn as_finite(&self) -> Option<f64> {
        match self {
            Ddd::Finite(v) => Some(*v),
            _ => None,
        }
    }

    /// Rendering used in reports: "inf", "n/a" or the number.
    pub fn render(&self, decimals: usize) -> String {
        match self {
            Ddd::Finite(v) => format!("{v:.decimals$}"),
            Ddd::Infinite => "inf".to_string(),
            Ddd::Undefined => "n/a".to_string(),
        }
    }
}

/// Computes the debiased descent direction of a cross-tab.
pub fn ddd(tab: &CrossTab) -> Result<Ddd, MetricsError> {
    if tab.total() == 0 {
        return Err(MetricsError::EmptyTab);
    }
    if tab.wr == 0 {
        return Ok(if tab.rw > 0 { Ddd::Infinite } else { Ddd::Undefined });
    }
    let acc = acc2(tab)?;
    if acc == 0.0 {
        return Ok(Ddd::Undefined);
    }
    Ok(Ddd::Finite((tab.rw as f64 / tab.wr as f64) / acc))
}

/// Labels carried by every scored case, used for grouping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseLabels {
    pub ptf: usize,
    pub task_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hiding: Option<HidingStrategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtype: Option<PolicyType>,
}

/// One case's scored outcome, ready for aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCase {
    pub case_id: String,
    pub correct: bool,
    pub ap: f64,
    pub optimal: bool,
    pub labels: CaseLabels,
}

/// Aggregated metrics over one set of scored cases.
///
/// The paired fields are present only when the report was built from a
/// cross-tab of two challenge runs. Serialization key order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub count: usize,
    pub accuracy: f64,
    pub ap_mean: f64,
    pub op_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ddd: Option<Ddd>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub grouped: BTreeMap<String, MetricReport>,
}

/// Mergeable counts behind a [`MetricReport`]; shards combine associatively.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricAccumulator {
    pub count: u64,
    pub correct: u64,
    pub optimal: u64,
    pub ap_sum: f64,
}

impl MetricAccumulator {
    pub fn push(&mut self, case: &ScoredCase) {
        self.count += 1;
        self.correct += u64::from(case.correct);
        self.optimal += u64::from(case.optimal);
        self.ap_sum += case.ap;
    }

    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.count += other.count;
        self.correct += other.correct;
        self.optimal += other.optimal;
        self.ap_sum += other.ap_sum;
    }

    pub fn finalize(&self) -> MetricReport {
        let n = self.count.max(1) as f64;
        MetricReport {
            count: self.count as usize,
            accuracy: self.correct as f64 / n,
            ap_mean: self.ap_sum / n,
            op_rate: self.optimal as f64 / n,
            acc2: None,
            vf: None,
            ddd: None,
            grouped: BTreeMap::new(),
        }
    }
}

/// Computes accuracy, mean accomplish progress and optimal-path rate.
pub fn compute_report(results: &[ScoredCase]) -> MetricReport {
    let mut acc = MetricAccumulator::default();
    for case in results {
        acc.push(case);
    }
    acc.finalize()
}

/// Builds a correctness map keyed by case id.
pub fn correctness_map(results: &[ScoredCase]) -> BTreeMap<String, bool> {
    results
        .iter()
        .map(|case| (case.case_id.clone(), case.correct))
        .collect()
}

/// Grouping selectors over case labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    Ptf,
    TaskCount,
    Hiding,
    MultiSubtype,
}

impl GroupKey {
    fn selector_name(self) -> &'static str {
        match self {
            GroupKey::Ptf => "ptf",
            GroupKey::TaskCount => "task_count",
            GroupKey::Hiding => "hiding",
            GroupKey::MultiSubtype => "multi_subtype",
        }
    }

    fn label_of(self, case: &ScoredCase) -> Result<String, MetricsError> {
        let missing = || MetricsError::MissingLabel {
            case_id: case.case_id.clone(),
            selector: self.selector_name(),
        };
        match self {
            GroupKey::Ptf => Ok(case.labels.ptf.to_string()),
            GroupKey::TaskCount => Ok(case.labels.task_count.to_string()),
            GroupKey::Hiding => match case.labels.hiding {
                Some(HidingStrategy::Omit) => Ok("omit".into()),
                Some(HidingStrategy::Reference) => Ok("reference".into()),
                Some(HidingStrategy::LongContext) => Ok("long_context".into()),
                Some(HidingStrategy::None) | None => Err(missing()),
            },
            GroupKey::MultiSubtype => match case.labels.subtype {
                Some(PolicyType::MultiSerial) => Ok("multi_serial".into()),
                Some(PolicyType::MultiParallel) => Ok("multi_parallel".into()),
                Some(PolicyType::MultiMixed) => Ok("multi_mixed".into()),
                _ => Err(missing()),
            },
        }
    }
}

/// Partitions results by the selector and scores each non-empty subset.
pub fn group_metrics(
    results: &[ScoredCase],
    key: GroupKey,
) -> Result<BTreeMap<String, MetricReport>, MetricsError> {
    let mut buckets: BTreeMap<String, Vec<ScoredCase>> = BTreeMap::new();
    for case in results {
        buckets
            .entry(key.label_of(case)?)
            .or_default()
            .push(case.clone());
    }
    Ok(buckets
        .into_iter()
        .map(|(label, subset)| (label, compute_report(&subset)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use CoarsePolicy::{Chat, Multi, Single};

    #[test]
    fn ptf_of_constant_sequence_is_zero() {
        assert_eq!(ptf(&[Single, Single, Single]).unwrap(), 0);
    }

    #[test]
    fn ptf_counts_both_switches() {
        assert_eq!(ptf(&[Single, Multi, Single]).unwrap(), 2);
    }

    #[test]
    fn ptf_of_singleton_is_zero() {
        assert_eq!(ptf(&[Chat]).unwrap(), 0);
    }

    #[test]
    fn ptf_rejects_empty_sequences() {
        assert_eq!(ptf(&[]).unwrap_err(), MetricsError::EmptySequence);
    }

    fn map(pairs: &[(&str, bool)]) -> BTreeMap<String, bool> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn cross_tab_all_right() {
        let all = map(&[("a", true), ("b", true), ("c", true)]);
        let tab = cross_tab(&all, &all).unwrap();
        assert_eq!(tab, CrossTab::new(3, 0, 0, 0));
    }

    #[test]
    fn cross_tab_counts_a_single_flip() {
        let first = map(&[("a", true), ("b", true)]);
        let second = map(&[("a", true), ("b", false)]);
        let tab = cross_tab(&first, &second).unwrap();
        assert_eq!(tab, CrossTab::new(1, 1, 0, 0));
    }

    #[test]
    fn cross_tab_rejects_disjoint_key_sets() {
        let first = map(&[("a", true)]);
        let second = map(&[("b", true)]);
        assert_eq!(
            cross_tab(&first, &second).unwrap_err(),
            MetricsError::KeySetMismatch
        );
    }

    #[test]
    fn acc2_pins() {
        assert_eq!(acc2(&CrossTab::new(5, 1, 1, 3)).unwrap(), 0.5);
        assert_eq!(acc2(&CrossTab::new(0, 0, 0, 4)).unwrap(), 0.0);
        assert_eq!(acc2(&CrossTab::new(10, 0, 0, 0)).unwrap(), 1.0);
        assert_eq!(
            acc2(&CrossTab::default()).unwrap_err(),
            MetricsError::EmptyTab
        );
    }

    #[test]
    fn vf_pins() {
        assert_eq!(vf(&CrossTab::new(5, 1, 1, 3)).unwrap(), 0.2);
        assert_eq!(vf(&CrossTab::new(7, 0, 0, 3)).unwrap(), 0.0);
        assert_eq!(vf(&CrossTab::new(0, 2, 2, 0)).unwrap(), 1.0);
    }

    #[test]
    fn ddd_pins_and_sentinels() {
        assert_eq!(ddd(&CrossTab::new(5, 2, 1, 2)).unwrap(), Ddd::Finite(4.0));
        assert_eq!(ddd(&CrossTab::new(5, 0, 0, 5)).unwrap(), Ddd::Undefined);
        assert_eq!(ddd(&CrossTab::new(4, 3, 0, 1)).unwrap(), Ddd::Infinite);
        // Zero joint accuracy with both flip directions present.
        assert_eq!(ddd(&CrossTab::new(0, 2, 1, 1)).unwrap(), Ddd::Undefined);
    }

    #[test]
    fn ddd_renders_sentinels() {
        assert_eq!(Ddd::Finite(4.0).render(2), "4.00");
        assert_eq!(Ddd::Infinite.render(2), "inf");
        assert_eq!(Ddd::Undefined.render(2), "n/a");
    }

    fn scored(id: &str, correct: bool, ap: f64, optimal: bool, labels: CaseLabels) -> ScoredCase {
        ScoredCase {
            case_id: id.into(),
            correct,
            ap,
            optimal,
            labels,
        }
    }

    fn labels(ptf: usize, task_count: usize) -> CaseLabels {
        CaseLabels {
            ptf,
            task_count,
            hiding: None,
            subtype: None,
        }
    }

    #[test]
    fn grouping_by_ptf_partitions_three_task_cases() {
        let cases = vec![
            scored("a", true, 1.0, true, labels(0, 3)),
            scored("b", false, 0.5, false, labels(2, 3)),
            scored("c", true, 1.0, false, labels(2, 3)),
        ];
        let groups = group_metrics(&cases, GroupKey::Ptf).unwrap();
        assert_eq!(groups.keys().cloned().collect::<Vec<_>>(), vec!["0", "2"]);
        assert_eq!(groups["2"].count, 2);
        assert_eq!(groups["2"].accuracy, 0.5);
    }

    #[test]
    fn grouping_by_task_count_uses_expected_keys() {
        let cases: Vec<ScoredCase> = (1..=4)
            .map(|n| scored(&format!("c{n}"), true, 1.0, true, labels(0, n)))
            .collect();
        let groups = group_metrics(&cases, GroupKey::TaskCount).unwrap();
        assert_eq!(
            groups.keys().cloned().collect::<Vec<_>>(),
            vec!["1", "2", "3", "4"]
        );
    }

    #[test]
    fn grouping_by_hiding_requires_the_label() {
        let mut with = labels(1, 2);
        with.hiding = Some(HidingStrategy::Omit);
        let cases = vec![scored("a", true, 1.0, true, with)];
        let groups = group_metrics(&cases, GroupKey::Hiding).unwrap();
        assert_eq!(groups.keys().cloned().collect::<Vec<_>>(), vec!["omit"]);

        let missing = vec![scored("b", true, 1.0, true, labels(0, 1))];
        assert!(matches!(
            group_metrics(&missing, GroupKey::Hiding),
            Err(MetricsError::MissingLabel { .. })
        ));
    }

    #[test]
    fn vf_complements_the_stable_fraction_exactly() {
        let tab = CrossTab::new(5, 1, 1, 3);
        let stable = (tab.rr + tab.ww) as f64 / tab.total() as f64;
        assert_eq!(vf(&tab).unwrap() + stable, 1.0);
    }

    proptest! {
        #[test]
        fn ddd_is_scale_invariant(rr in 0u64..40, rw in 0u64..40, wr in 0u64..40, ww in 0u64..40, k in 1u64..10) {
            prop_assume!(rr + rw + wr + ww > 0);
            let tab = CrossTab::new(rr, rw, wr, ww);
            let scaled = CrossTab::new(rr * k, rw * k, wr * k, ww * k);
            prop_assert_eq!(acc2(&tab).unwrap(), acc2(&scaled).unwrap());
            prop_assert_eq!(vf(&tab).unwrap(), vf(&scaled).unwrap());
            match (ddd(&tab).unwrap(), ddd(&scaled).unwrap()) {
                (Ddd::Finite(a), Ddd::Finite(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn shard_merge_equals_whole_aggregation(
            aps in prop::collection::vec((any::<bool>(), 0.0f64..=1.0, any::<bool>()), 1..40),
            split in any::<prop::sample::Index>(),
        ) {
            let cases: Vec<ScoredCase> = aps
                .iter()
                .enumerate()
                .map(|(i, (correct, ap, optimal))| scored(&format!("case{i}"), *correct, *ap, *optimal && *correct, labels(0, 1)))
                .collect();
            let cut = split.index(cases.len());
            let mut left = MetricAccumulator::default();
            for case in &cases[..cut] {
                left.push(case);
            }
            let mut right = MetricAccumulator::default();
            for case in &cases[cut..] {
                right.push(case);
            }
            left.merge(&right);
            let merged = left.finalize();
            let whole = compute_report(&cases);
            prop_assert_eq!(merged.count, whole.count);
            prop_assert_eq!(merged.accuracy, whole.accuracy);
            prop_assert_eq!(merged.op_rate, whole.op_rate);
            prop_assert!((merged.ap_mean - whole.ap_mean).abs() < 1e-12);
        }

        /// Coarse projection happens before counting, so refining multi
        /// subtypes never changes the transition count.
        #[test]
        fn ptf_is_invariant_under_subtype_refinement(seq in prop::collection::vec(0usize..4, 1..6), picks in prop::collection::vec(0usize..3, 6)) {
            let coarse: Vec<CoarsePolicy> = seq.iter().map(|i| CoarsePolicy::ALL[*i]).collect();
            let refined: Vec<CoarsePolicy> = coarse
                .iter()
                .enumerate()
                .map(|(i, c)| match c {
                    CoarsePolicy::Multi => {
                        let subtype = match picks[i % picks.len()] {
                            0 => PolicyType::MultiSerial,
                            1 => PolicyType::MultiParallel,
                            _ => PolicyType::MultiMixed,
                        };
                        subtype.coarse()
                    }
                    other => *other,
                })
                .collect();
            prop_assert_eq!(ptf(&coarse).unwrap(), ptf(&refined).unwrap());
        }
    }
}
