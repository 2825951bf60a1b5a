//! Task-independent embedding quality: link distributions and link
//! reconstruction from pairwise inner products.
//!
//! All pair-indexed quantities use unordered pairs `i < j` in lexicographic
//! order, so a graph on `n` nodes has `n(n-1)/2` entries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::pointcloud::PointCloud;
use crate::skipgram::sigmoid;

pub fn num_pairs(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Position of the pair `{i, j}` (`i != j`) in lexicographic order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = (i.min(j), i.max(j));
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// Probability vector over unordered node pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDistribution {
    pub values: Vec<f64>,
    pub num_nodes: usize,
    pub graph_id: String,
}

/// Uniform mass `1/|E|` on every edge.
pub fn observed_link_distribution(g: &Graph) -> Result<LinkDistribution> {
    if g.num_edges() == 0 {
        return Err(Error::NoEdges);
    }
    let n = g.num_nodes();
    let mass = 1.0 / g.num_edges() as f64;
    let mut values = vec![0.0; num_pairs(n)];
    for e in g.edges() {
        values[pair_index(n, e.u, e.v)] = mass;
    }
    Ok(LinkDistribution { values, num_nodes: n, graph_id: g.id().to_string() })
}

/// Linear-kernel similarity `x_i · x_j`.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// All pairwise similarities in pair order, scanned in parallel by row.
pub fn pair_scores(x: &PointCloud) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| x.row(i).iter().zip(x.row(j)).map(|(a, b)| a * b).sum::<f64>())
                .collect::<Vec<f64>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Normalized `σ(x_i · x_j)` over all pairs.
pub fn empirical_link_distribution(x: &PointCloud) -> Result<LinkDistribution> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter("link distribution needs at least two nodes".into()));
    }
    let mut values: Vec<f64> = pair_scores(x).into_iter().map(sigmoid).collect();
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    Ok(LinkDistribution { values, num_nodes: x.len(), graph_id: x.graph_id.clone() })
}

/// Ground metric used to compare two link distributions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionMode {
    /// Discrete metric on pair indices; the distance is total variation.
    #[default]
    Discrete,
    /// 1-D Wasserstein-1 between the multisets of per-pair probabilities.
    Sorted1d,
}

pub fn distribution_distance(p: &LinkDistribution, q: &LinkDistribution, mode: DistributionMode) -> Result<f64> {
    if p.values.len() != q.values.len() {
        return Err(Error::ShapeMismatch(format!(
            "link distributions over {} and {} pairs",
            p.values.len(),
            q.values.len()
        )));
    }
    Ok(match mode {
        DistributionMode::Discrete => 0.5 * p.values.iter().zip(&q.values).map(|(a, b)| (a - b).abs()).sum::<f64>(),
        DistributionMode::Sorted1d => {
            if p.values.is_empty() {
                return Ok(0.0);
            }
            let mut a = p.values.clone();
            let mut b = q.values.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
        }
    })
}

/// Confusion counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Contingency {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Contingency tables of the superlevel-set classifier `score ≥ λ`, one per
/// distinct score value, with thresholds ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSweep {
    pub thresholds: Vec<f64>,
    pub tables: Vec<Contingency>,
    pub positives: usize,
    pub negatives: usize,
}

impl ScoreSweep {
    /// Builds the sweep from raw scores and ground-truth labels.
    pub fn from_scores(scores: &[f64], labels: &[bool]) -> Result<ScoreSweep> {
        if scores.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} scores for {} labels", scores.len(), labels.len())));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidParameter("scores contain NaN".into()));
        }
        let positives = labels.iter().filter(|&&l| l).count();
        let negatives = labels.len() - positives;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

        let mut thresholds = Vec::new();
        let mut tables = Vec::new();
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut k = 0;
        while k < order.len() {
            let level = scores[order[k]];
            while k < order.len() && scores[order[k]] == level {
                if labels[order[k]] { tp += 1 } else { fp += 1 }
                k += 1;
            }
            thresholds.push(level);
            tables.push(Contingency { tp, fp, tn: negatives - fp, fn_: positives - tp });
        }
        thresholds.reverse();
        tables.reverse();
        Ok(ScoreSweep { thresholds, tables, positives, negatives })
    }
}

/// Sweeps the inner-product classifier of `x` against the edges of `g`.
pub fn score_sweep(g: &Graph, x: &PointCloud) -> Result<ScoreSweep> {
    if g.num_nodes() != x.len() {
        return Err(Error::ShapeMismatch(format!(
            "graph has {} nodes but the embedding has {} rows",
            g.num_nodes(),
            x.len()
        )));
    }
    ScoreSweep::from_scores(&pair_scores(x), &edge_labels(g))
}

/// Edge indicator for every pair, in pair order.
pub fn edge_labels(g: &Graph) -> Vec<bool> {
    let n = g.num_nodes();
    let mut labels = vec![false; num_pairs(n)];
    for e in g.edges() {
        labels[pair_index(n, e.u, e.v)] = true;
    }
    labels
}

/// Area under the precision–recall curve, taken as a right-continuous step
/// function while descending through the thresholds:
/// `Σ_k (R_k − R_{k−1}) · P_k`.
pub fn auprc(sweep: &ScoreSweep) -> Result<f64> {
    if sweep.positives == 0 {
        return Err(Error::Degenerate("AUPRC needs at least one positive pair".into()));
    }
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for t in sweep.tables.iter().rev() {
        let recall = t.tp as f64 / sweep.positives as f64;
        let precision = t.tp as f64 / (t.tp + t.fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}

/// Trapezoidal area under the ROC curve from (0, 0) to (1, 1).
pub fn auroc(sweep: &ScoreSweep) -> Result<f64> {
    if sweep.positives == 0 || sweep.negatives == 0 {
        return Err(Error::Degenerate("AUROC needs both edges and non-edges".into()));
    }
    let (p, n) = (sweep.positives as f64, sweep.negatives as f64);
    let mut area = 0.0;
    let (mut prev_fpr, mut prev_tpr) = (0.0, 0.0);
    for t in sweep.tables.iter().rev() {
        let (fpr, tpr) = (t.fp as f64 / n, t.tp as f64 / p);
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    Ok(area)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMetric {
    WLinkDiscrete,
    WLinkSorted1d,
    Auprc,
    Auroc,
}

impl QualityMetric {
    pub const ALL: [QualityMetric; 4] =
        [QualityMetric::WLinkDiscrete, QualityMetric::WLinkSorted1d, QualityMetric::Auprc, QualityMetric::Auroc];

    pub fn name(self) -> &'static str {
        match self {
            QualityMetric::WLinkDiscrete => "w_link_discrete",
            QualityMetric::WLinkSorted1d => "w_link_sorted1d",
            QualityMetric::Auprc => "auprc",
            QualityMetric::Auroc => "auroc",
        }
    }

    pub fn parse(name: &str) -> Option<QualityMetric> {
        QualityMetric::ALL.into_iter().find(|m| m.name() == name)
    }
}

/// Evaluates the requested quality metrics of embedding `x` of graph `g`.
pub fn evaluate(g: &Graph, x: &PointCloud, metrics: &[QualityMetric]) -> Result<Vec<(QualityMetric, f64)>> {
    let mut out = Vec::with_capacity(metrics.len());
    let wants_dist = metrics.iter().any(|m| matches!(m, QualityMetric::WLinkDiscrete | QualityMetric::WLinkSorted1d));
    let wants_sweep = metrics.iter().any(|m| matches!(m, QualityMetric::Auprc | QualityMetric::Auroc));
    let dists = if wants_dist { Some((observed_link_distribution(g)?, empirical_link_distribution(x)?)) } else { None };
    let sweep = if wants_sweep { Some(score_sweep(g, x)?) } else { None };
    for &m in metrics {
        let value = match m {
            QualityMetric::WLinkDiscrete => {
                let (pg, px) = dists.as_ref().expect("computed above");
                distribution_distance(pg, px, DistributionMode::Discrete)?
            }
            QualityMetric::WLinkSorted1d => {
                let (pg, px) = dists.as_ref().expect("computed above");
                distribution_distance(pg, px, DistributionMode::Sorted1d)?
            }
            QualityMetric::Auprc => auprc(sweep.as_ref().expect("computed above"))?,
            QualityMetric::Auroc => auroc(sweep.as_ref().expect("computed above"))?,
        };
        out.push((m, value));
    }
    Ok(out)
}
