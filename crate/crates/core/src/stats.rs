//! Rank tests, Bonferroni correction and group-wise comparison reports.
//!
//! Exact null distributions are computed by dynamic programming over doubled
//! midranks, which are integers even in the presence of ties. For the
//! signed-rank test this counts the same `2^n` sign assignments a brute-force
//! enumeration would visit, in `O(n · n(n+1))` time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::metrics::DistanceMatrixSummary;

/// Largest number of nonzero differences tested exactly.
pub const EXACT_SIGNED_RANK_MAX: usize = 25;
/// Largest combined sample size tested exactly by the rank-sum test.
pub const EXACT_RANK_SUM_MAX: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: Method,
    /// All differences were zero; the test carries no information.
    #[serde(default)]
    pub degenerate: bool,
}

/// Midranks (1-based) of `values`; tied values share the mean of their ranks.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of the groups of tied values.
fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        sizes.push(j);
        i += j;
    }
    sizes
}

fn standard_normal_sf(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    1.0 - normal.cdf(z)
}

/// Wilcoxon signed-rank test of the paired samples `a` and `b`, two-sided.
///
/// Zero differences are dropped. The statistic is `min(W⁺, W⁻)`. Up to
/// [`EXACT_SIGNED_RANK_MAX`] nonzero differences the p-value is exact;
/// beyond that a normal approximation with tie-corrected variance and
/// continuity correction is used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("paired samples of lengths {} and {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("signed-rank test needs at least one pair".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(TestResult { statistic: 0.0, p_value: 1.0, n_effective: 0, method: Method::Exact, degenerate: true });
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let statistic = w_plus.min(w_minus);

    if n <= EXACT_SIGNED_RANK_MAX {
        // Doubled midranks are integers.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        let mut counts = vec![0u64; max_sum + 1];
        counts[0] = 1;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if counts[s] > 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let observed = (2.0 * statistic).round() as usize;
        let tail: u64 = counts[..=observed].iter().sum();
        let p_value = (2.0 * tail as f64 / (1u64 << n) as f64).min(1.0);
        return Ok(TestResult { statistic, p_value, n_effective: n, method: Method::Exact, degenerate: false });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes(&abs).iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let variance = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let p_value = (2.0 * standard_normal_sf(z)).min(1.0);
    Ok(TestResult { statistic, p_value, n_effective: n, method: Method::NormalApproximation, degenerate: false })
}

/// Wilcoxon rank-sum (Mann–Whitney) test of two independent samples,
/// two-sided. The statistic is `min(U₁, U₂)`.
///
/// Exact under the permutation distribution of midranks while
/// `a.len() + b.len() ≤` [`EXACT_RANK_SUM_MAX`]; otherwise a tie-corrected
/// normal approximation with continuity correction.
pub fn rank_sum(a: &[f64], b: &[f64]) -> Result<TestResult> {
    let (n1, n2) = (a.len(), b.len());
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter("rank-sum test needs two nonempty samples".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let ranks = midranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let u1 = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let u2 = (n1 * n2) as f64 - u1;
    let statistic = u1.min(u2);

    if tie_sizes(&pooled).len() == 1 {
        return Ok(TestResult { statistic, p_value: 1.0, n_effective: n, method: Method::Exact, degenerate: true });
    }

    if n <= EXACT_RANK_SUM_MAX {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let max_sum: usize = doubled.iter().sum();
        // ways[k][s]: subsets of size k with doubled rank sum s.
        let mut ways = vec![vec![0u64; max_sum + 1]; n1 + 1];
        ways[0][0] = 1;
        for (seen, &r) in doubled.iter().enumerate() {
            for k in (1..=n1.min(seen + 1)).rev() {
                let (lower, upper) = ways.split_at_mut(k);
                let (src, dst) = (&lower[k - 1], &mut upper[0]);
                for s in (0..=max_sum - r).rev() {
                    if src[s] > 0 {
                        dst[s + r] += src[s];
                    }
                }
            }
        }
        let observed = (2.0 * r1).round() as usize;
        // Midranks of tied data need not be symmetric, so both tails are counted.
        let lower: u64 = ways[n1][..=observed.min(max_sum)].iter().sum();
        let upper: u64 = ways[n1][observed.min(max_sum + 1)..].iter().sum();
        let all: u64 = ways[n1].iter().sum();
        let p_value = (2.0 * lower.min(upper) as f64 / all as f64).min(1.0);
        return Ok(TestResult { statistic, p_value, n_effective: n, method: Method::Exact, degenerate: false });
    }

    let (f1, f2, nf) = (n1 as f64, n2 as f64, n as f64);
    let mean = f1 * f2 / 2.0;
    let tie_term: f64 = tie_sizes(&pooled).iter().map(|&t| (t * t * t - t) as f64).sum();
    let variance = f1 * f2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let z = ((u1 - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let p_value = (2.0 * standard_normal_sf(z)).min(1.0);
    Ok(TestResult { statistic, p_value, n_effective: n, method: Method::NormalApproximation, degenerate: false })
}

/// Flags `p_i < alpha / m` for `m = p_values.len()`.
pub fn bonferroni(p_values: &[f64], alpha: f64) -> Result<Vec<bool>> {
    if p_values.is_empty() {
        return Err(Error::InvalidParameter("Bonferroni correction of zero tests".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} is not in (0, 1)")));
    }
    let cutoff = alpha / p_values.len() as f64;
    Ok(p_values.iter().map(|&p| p < cutoff).collect())
}

/// How two groups' distance vectors are compared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Wilcoxon signed-rank on vectors paired by canonical repeat-pair index.
    #[default]
    SignedRank,
    /// Unpaired Wilcoxon rank-sum.
    RankSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub group_a: String,
    pub group_b: String,
    #[serde(rename = "W")]
    pub statistic: f64,
    #[serde(rename = "p")]
    pub p_value: f64,
    pub n_effective: usize,
    pub method: Method,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparisonReport {
    pub alpha: f64,
    pub m: usize,
    pub test: TestKind,
    pub pairs: Vec<Comparison>,
    pub fraction_significant: f64,
}

/// Tests every unordered pair of groups and applies Bonferroni across all of
/// them.
pub fn compare_all_groups(distances: &DistanceMatrixSummary, alpha: f64, test: TestKind) -> Result<PairwiseComparisonReport> {
    let groups = &distances.groups;
    if groups.len() < 2 {
        return Err(Error::InvalidParameter("group comparison needs at least two groups".into()));
    }
    if test == TestKind::SignedRank {
        let len = groups[0].values.len();
        if let Some(g) = groups.iter().find(|g| g.values.len() != len) {
            return Err(Error::ShapeMismatch(format!(
                "group {} has {} distances, expected {len}",
                g.group,
                g.values.len()
            )));
        }
    }
    let pairs: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|i| ((i + 1)..groups.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<TestResult> = pairs
        .par_iter()
        .map(|&(i, j)| match test {
            TestKind::SignedRank => wilcoxon_signed_rank(&groups[i].values, &groups[j].values),
            TestKind::RankSum => rank_sum(&groups[i].values, &groups[j].values),
        })
        .collect::<Result<_>>()?;
    let p_values: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    let flags = bonferroni(&p_values, alpha)?;
    let significant = flags.iter().filter(|&&f| f).count();
    let comparisons = pairs
        .iter()
        .zip(results)
        .zip(&flags)
        .map(|((&(i, j), r), &flag)| Comparison {
            group_a: groups[i].group.clone(),
            group_b: groups[j].group.clone(),
            statistic: r.statistic,
            p_value: r.p_value,
            n_effective: r.n_effective,
            method: r.method,
            significant: flag,
        })
        .collect();
    Ok(PairwiseComparisonReport {
        alpha,
        m: pairs.len(),
        test,
        pairs: comparisons,
        fraction_significant: significant as f64 / pairs.len() as f64,
    })
}

/// Spearman rank correlation; `None` when either input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (midranks(x), midranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{CloudMetric, GroupDistances};

    fn groups(vectors: &[(&str, Vec<f64>)]) -> DistanceMatrixSummary {
        DistanceMatrixSummary {
            metric: CloudMetric::Wasserstein2,
            groups: vectors
                .iter()
                .map(|(name, v)| GroupDistances { group: name.to_string(), pairs: vec![], values: v.clone() })
                .collect(),
        }
    }

    #[test]
    fn midranks_with_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.p_value, r.statistic, r.n_effective), (1.0, 0.0, 0));
    }

    #[test]
    fn three_positive_differences() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 0.25);
        assert_eq!(r.method, Method::Exact);
    }

    #[test]
    fn signed_rank_errors() {
        assert!(wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).is_err());
        assert!(wilcoxon_signed_rank(&[], &[]).is_err());
    }

    #[test]
    fn large_samples_use_normal_approximation() {
        let a: Vec<f64> = (0..40).map(|i| i as f64 * 0.37 + 1.0).collect();
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 1.3).sin()).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(r.method, Method::NormalApproximation);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn bonferroni_examples() {
        let mut p = vec![0.5; 10];
        p[0] = 0.004;
        p[1] = 0.006;
        let flags = bonferroni(&p, 0.05).unwrap();
        assert!(flags[0]);
        assert!(!flags[1]);
        assert_eq!(bonferroni(&[0.049], 0.05).unwrap(), vec![true]);
        assert!(bonferroni(&[], 0.05).is_err());
        assert!(bonferroni(&[0.1], 1.0).is_err());
    }

    #[test]
    fn rank_sum_complete_separation() {
        // 3 vs 3 fully separated: exact two-sided p = 2 / C(6,3).
        let r = rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.1).abs() < 1e-15);
        assert!(rank_sum(&[1.0, 1.0], &[1.0]).unwrap().degenerate);
    }

    #[test]
    fn comparison_counts_and_fractions() {
        let same = groups(&[("a", vec![0.1, 0.2, 0.3]), ("b", vec![0.1, 0.2, 0.3])]);
        assert_eq!(compare_all_groups(&same, 0.05, TestKind::SignedRank).unwrap().fraction_significant, 0.0);

        let three = groups(&[("a", vec![1.0, 2.0]), ("b", vec![2.0, 1.0]), ("c", vec![0.0, 0.5])]);
        let report = compare_all_groups(&three, 0.05, TestKind::SignedRank).unwrap();
        assert_eq!(report.m, 3);
        assert_eq!(report.pairs.len(), 3);

        let uneven = groups(&[("a", vec![1.0, 2.0]), ("b", vec![1.0])]);
        assert!(compare_all_groups(&uneven, 0.05, TestKind::SignedRank).is_err());
        assert!(compare_all_groups(&uneven, 0.05, TestKind::RankSum).is_ok());
        assert!(compare_all_groups(&groups(&[("a", vec![1.0])]), 0.05, TestKind::SignedRank).is_err());
    }

    #[test]
    fn constant_gap_of_45_pairs_is_significant() {
        let g = groups(&[("zero", vec![0.0; 45]), ("one", vec![1.0; 45])]);
        let report = compare_all_groups(&g, 0.05, TestKind::SignedRank).unwrap();
        // 45 differences exceed the exact cutoff; every |d| ties, so the
        // tie-corrected variance is 45 * 23^2 / 4.
        let pair = &report.pairs[0];
        assert_eq!(pair.method, Method::NormalApproximation);
        let z = (1035.0 - 517.5 - 0.5) / (45.0f64 * 529.0 / 4.0).sqrt();
        assert!((pair.p_value - 2.0 * standard_normal_sf(z)).abs() < 1e-15);
        assert!(pair.p_value < 1e-10);
        assert_eq!(report.fraction_significant, 1.0);
    }

    #[test]
    fn spearman_cases() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 40.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), None);
    }

    #[test]
    fn report_json_field_names() {
        let g = groups(&[("a", vec![1.0, 2.0]), ("b", vec![2.0, 4.0])]);
        let json = serde_json::to_value(compare_all_groups(&g, 0.05, TestKind::SignedRank).unwrap()).unwrap();
        for key in ["alpha", "m", "pairs", "fraction_significant"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let pair = &json["pairs"][0];
        for key in ["group_a", "group_b", "W", "p", "significant"] {
            assert!(pair.get(key).is_some(), "missing {key}");
        }
    }
}
