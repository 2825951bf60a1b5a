use serde::{Deserialize, Serialize};

use super::distance::CloudMetric;

/// Five-number summary plus mean and sample variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(quantile_sorted(&sorted, 0.5))
}

impl DistributionSummary {
    pub fn of(values: &[f64]) -> Option<DistributionSummary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let variance = if sorted.len() > 1 {
            sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(DistributionSummary {
            count: sorted.len(),
            min: sorted[0],
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
            mean,
            variance,
        })
    }
}

/// Intra-group distances of one parameter group, in canonical repeat-pair
/// order `(0,1), (0,2), …, (r-2, r-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistances {
    pub group: String,
    pub pairs: Vec<(usize, usize)>,
    pub values: Vec<f64>,
}

impl GroupDistances {
    pub fn summary(&self) -> Option<DistributionSummary> {
        DistributionSummary::of(&self.values)
    }
}

/// All intra-group distance vectors for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrixSummary {
    pub metric: CloudMetric,
    pub groups: Vec<GroupDistances>,
}

impl DistanceMatrixSummary {
    pub fn group(&self, name: &str) -> Option<&GroupDistances> {
        self.groups.iter().find(|g| g.group == name)
    }
}
