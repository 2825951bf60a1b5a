mod common;

use n2vlab_core::metrics::{CloudMetric, DistanceMatrixSummary, GroupDistances};
use n2vlab_core::stats::{bonferroni, compare_all_groups, midranks, rank_sum, spearman, wilcoxon_signed_rank, Method, TestKind};
use proptest::prelude::*;
use rand::Rng;

use common::{false_positive_rate, rng, sign_flip_p};

/// Exact two-sided rank-sum p-value by visiting every split of the pooled
/// sample.
fn permutation_rank_sum_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let n1 = a.len();
    let observed: f64 = ranks[..n1].iter().sum();
    let (mut lower, mut upper, mut all) = (0u64, 0u64, 0u64);
    for mask in 0u64..(1 << pooled.len()) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let s: f64 = (0..pooled.len()).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        all += 1;
        if s <= observed + 1e-9 {
            lower += 1;
        }
        if s >= observed - 1e-9 {
            upper += 1;
        }
    }
    (2.0 * lower.min(upper) as f64 / all as f64).min(1.0)
}

#[test]
fn signed_rank_matches_sign_flip_enumeration() {
    let mut r = rng(40);
    for case in 0..500 {
        let n = r.random_range(1..=12);
        // Rounded values make ties and zero differences common.
        let round = case % 2 == 0;
        let draw = |r: &mut rand_chacha::ChaCha8Rng| {
            let v: f64 = r.random_range(0.0..4.0);
            if round { v.round() } else { v }
        };
        let a: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let b: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let res = wilcoxon_signed_rank(&a, &b).unwrap();
        assert_eq!(res.method, Method::Exact);
        assert!((res.p_value - sign_flip_p(&a, &b)).abs() < 1e-12, "case {case}: {a:?} {b:?}");
        let swapped = wilcoxon_signed_rank(&b, &a).unwrap();
        assert_eq!(res.p_value, swapped.p_value);
        assert_eq!(res.statistic, swapped.statistic);
    }
}

#[test]
fn rank_sum_matches_permutation_enumeration() {
    let mut r = rng(41);
    for _ in 0..200 {
        let n1 = r.random_range(1..=7);
        let n2 = r.random_range(1..=7);
        let a: Vec<f64> = (0..n1).map(|_| r.random_range(0..5) as f64).collect();
        let b: Vec<f64> = (0..n2).map(|_| r.random_range(0..5) as f64).collect();
        let res = rank_sum(&a, &b).unwrap();
        assert_eq!(res.method, Method::Exact);
        assert!((res.p_value - permutation_rank_sum_p(&a, &b)).abs() < 1e-12, "{a:?} {b:?}");
        assert_eq!(res.p_value, rank_sum(&b, &a).unwrap().p_value);
    }
}

#[test]
fn null_calibration() {
    let exact = false_positive_rate(15, 42, |a, b| wilcoxon_signed_rank(a, b).unwrap().p_value);
    assert!((0.025..=0.10).contains(&exact), "exact signed-rank: {exact}");
    let approx = false_positive_rate(45, 43, |a, b| {
        let res = wilcoxon_signed_rank(a, b).unwrap();
        assert_eq!(res.method, Method::NormalApproximation);
        res.p_value
    });
    assert!((0.025..=0.10).contains(&approx), "approximate signed-rank: {approx}");
    let unpaired = false_positive_rate(10, 44, |a, b| rank_sum(a, b).unwrap().p_value);
    assert!((0.025..=0.10).contains(&unpaired), "rank-sum: {unpaired}");
}

fn summary(groups: Vec<Vec<f64>>) -> DistanceMatrixSummary {
    DistanceMatrixSummary {
        metric: CloudMetric::Wasserstein2,
        groups: groups
            .into_iter()
            .enumerate()
            .map(|(i, values)| GroupDistances {
                group: format!("g{i}"),
                pairs: (0..values.len()).map(|k| (0, k + 1)).collect(),
                values,
            })
            .collect(),
    }
}

#[test]
fn comparison_counts_and_correction() {
    let mut r = rng(46);
    let groups: Vec<Vec<f64>> = (0..3).map(|g| (0..10).map(|_| g as f64 + r.random_range(0.0..0.1)).collect()).collect();
    let report = compare_all_groups(&summary(groups), 0.05, TestKind::SignedRank).unwrap();
    assert_eq!(report.m, 3);
    assert_eq!(report.pairs.len(), 3);
    // 10 positive differences: exact p = 2 / 1024, below 0.05 / 3.
    for c in &report.pairs {
        assert!((c.p_value - 2.0 / 1024.0).abs() < 1e-15);
        assert!(c.significant);
    }
    assert_eq!(report.fraction_significant, 1.0);
}

proptest! {
    #[test]
    fn bonferroni_is_monotone_in_m(p in prop::collection::vec(0.0f64..0.2, 1..30), extra in prop::collection::vec(0.0f64..1.0, 0..30), alpha in 0.01f64..0.2) {
        let base = bonferroni(&p, alpha).unwrap();
        let mut longer = p.clone();
        longer.extend(&extra);
        let more = bonferroni(&longer, alpha).unwrap();
        for (i, (&a, &b)) in base.iter().zip(&more).enumerate() {
            prop_assert!(!b || a, "test {} became significant when m grew", i);
            prop_assert_eq!(a, p[i] < alpha / p.len() as f64);
        }
    }

    #[test]
    fn p_values_are_probabilities(a in prop::collection::vec(-5.0f64..5.0, 1..40), shift in -1.0f64..1.0) {
        let b: Vec<f64> = a.iter().rev().map(|v| v + shift).collect();
        let s = wilcoxon_signed_rank(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.p_value));
        let u = rank_sum(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&u.p_value));
    }

    #[test]
    fn spearman_is_invariant_under_monotone_maps(x in prop::collection::vec(-5.0f64..5.0, 3..20)) {
        let y: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        if let Some(rho) = spearman(&x, &y) {
            prop_assert!((rho - 1.0).abs() < 1e-12);
        }
    }
}
