//! Stability analysis over a finished distance table.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{median, CloudMetric, DistanceMatrixSummary, DistributionSummary, GroupDistances};
use crate::stats::{compare_all_groups, spearman, PairwiseComparisonReport, TestKind};

use super::spec::{param_distance, ParamSet};
use super::store::{DistanceRow, RunRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub successful_repeats: usize,
    /// False when some repeats failed; such groups are left out of the tests.
    pub complete: bool,
    pub summary: Option<DistributionSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    /// Spearman correlation between parameter distance and median cross-group
    /// distance; `None` when undefined.
    pub rho: Option<f64>,
    pub num_pairs: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: CloudMetric,
    pub groups: Vec<GroupSummary>,
    pub excluded_groups: Vec<String>,
    pub comparisons: PairwiseComparisonReport,
    pub rank_correlation: RankCorrelation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub alpha: f64,
    pub test: TestKind,
    pub repeats: usize,
    pub metrics: Vec<MetricReport>,
}

impl StabilityReport {
    pub fn metric(&self, metric: CloudMetric) -> Option<&MetricReport> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

/// Intra-group distance vectors for `metric`, grouped and ordered by repeat
/// pair. Groups appear in the order given by `groups`.
pub fn intra_group_distances(rows: &[DistanceRow], metric: CloudMetric, groups: &[String]) -> DistanceMatrixSummary {
    let mut by_group: BTreeMap<&str, Vec<((usize, usize), f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric && r.is_intra()) {
        by_group.entry(&r.group_a).or_default().push(((r.run_a, r.run_b), r.value));
    }
    let groups = groups
        .iter()
        .map(|g| {
            let mut entries = by_group.remove(g.as_str()).unwrap_or_default();
            entries.sort_by_key(|e| e.0);
            GroupDistances {
                group: g.clone(),
                pairs: entries.iter().map(|e| e.0).collect(),
                values: entries.iter().map(|e| e.1).collect(),
            }
        })
        .collect();
    DistanceMatrixSummary { metric, groups }
}

/// Per-group summaries, pairwise group tests with Bonferroni correction, and
/// the rank correlation between parameter distance and the median
/// cross-group distance, for each metric present in `distances`.
///
/// Group order follows the first appearance of each parameter set in
/// `records`. A group is complete when it has as many successful repeats as
/// the best group.
pub fn stability_report(
    records: &[RunRecord],
    distances: &[DistanceRow],
    metrics: &[CloudMetric],
    alpha: f64,
    test: TestKind,
) -> Result<StabilityReport> {
    let mut order: Vec<String> = Vec::new();
    let mut ok_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        if !order.contains(&r.param_set) {
            order.push(r.param_set.clone());
        }
        *ok_counts.entry(&r.param_set).or_default() += usize::from(r.is_ok());
    }
    let repeats = ok_counts.values().copied().max().unwrap_or(0);
    if repeats < 2 {
        return Err(Error::InvalidParameter("stability analysis needs at least two successful repeats".into()));
    }
    let complete: Vec<String> = order.iter().filter(|g| ok_counts[g.as_str()] == repeats).cloned().collect();
    if complete.len() < 2 {
        return Err(Error::InvalidParameter("stability analysis needs at least two complete groups".into()));
    }
    let excluded: Vec<String> = order.iter().filter(|g| !complete.contains(g)).cloned().collect();

    let mut reports = Vec::new();
    for &metric in metrics {
        let all = intra_group_distances(distances, metric, &order);
        let groups = all
            .groups
            .iter()
            .map(|g| GroupSummary {
                group: g.group.clone(),
                successful_repeats: ok_counts[g.group.as_str()],
                complete: complete.contains(&g.group),
                summary: g.summary(),
            })
            .collect();
        let tested = DistanceMatrixSummary {
            metric,
            groups: all.groups.into_iter().filter(|g| complete.contains(&g.group)).collect(),
        };
        let comparisons = compare_all_groups(&tested, alpha, test)?;
        reports.push(MetricReport {
            metric,
            groups,
            excluded_groups: excluded.clone(),
            comparisons,
            rank_correlation: rank_correlation(distances, metric, &complete)?,
        });
    }
    Ok(StabilityReport { alpha, test, repeats, metrics: reports })
}

fn rank_correlation(rows: &[DistanceRow], metric: CloudMetric, groups: &[String]) -> Result<RankCorrelation> {
    let allowed: BTreeSet<&str> = groups.iter().map(String::as_str).collect();
    let mut cross: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.metric == metric && !r.is_intra()) {
        if allowed.contains(r.group_a.as_str()) && allowed.contains(r.group_b.as_str()) {
            let key = if r.group_a <= r.group_b { (&*r.group_a, &*r.group_b) } else { (&*r.group_b, &*r.group_a) };
            cross.entry(key).or_default().push(r.value);
        }
    }
    let mut hamming = Vec::new();
    let mut med = Vec::new();
    for ((a, b), values) in &cross {
        hamming.push(param_distance(&ParamSet::from_label(a)?, &ParamSet::from_label(b)?) as f64);
        med.push(median(values).expect("nonempty"));
    }
    let rho = spearman(&hamming, &med);
    Ok(RankCorrelation { rho, num_pairs: hamming.len(), degenerate: rho.is_none() })
}
