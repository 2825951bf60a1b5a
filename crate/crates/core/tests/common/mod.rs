#![allow(dead_code)]

use n2vlab_core::skipgram::{neg_log_sigmoid, sgns_gradients};
use n2vlab_core::stats::midranks;
use n2vlab_core::PointCloud;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, d: usize) -> PointCloud {
    let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    PointCloud::new(n, d, data).unwrap()
}

/// Pearson chi-square statistic of observed counts against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> f64 {
    observed.iter().zip(expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum()
}

/// Upper critical value of the chi-square distribution.
pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha)
}

/// Random orthogonal matrix (row-major, d × d) by Gram-Schmidt.
pub fn random_orthogonal(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for u in &q {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= dot * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    q.concat()
}

/// Rows of `x` multiplied on the right by the d × d matrix `m`.
pub fn transform(x: &PointCloud, m: &[f64]) -> PointCloud {
    let d = x.dim();
    let data = x
        .rows()
        .flat_map(|r| (0..d).map(move |j| (0..d).map(|k| r[k] * m[k * d + j]).sum::<f64>()))
        .collect();
    PointCloud::new(x.len(), d, data).unwrap()
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

fn loss(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    neg_log_sigmoid(dot(center, context)) + negatives.iter().map(|n| neg_log_sigmoid(-dot(center, n))).sum::<f64>()
}

/// Relative error `‖a − b‖ / max(‖a‖, ‖b‖)`.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Largest relative error between analytic and central-difference gradients
/// over the participating vectors.
pub fn gradient_check(center: &[f64], context: &[f64], negatives: &[Vec<f64>], h: f64) -> f64 {
    let refs: Vec<&[f64]> = negatives.iter().map(Vec::as_slice).collect();
    let g = sgns_gradients(center, context, &refs).unwrap();
    assert!((g.loss - loss(center, context, negatives)).abs() < 1e-12);
    let numeric = |which: usize, len: usize| -> Vec<f64> {
        (0..len)
            .map(|i| {
                let eval = |delta: f64| {
                    let (mut c, mut o, mut n) = (center.to_vec(), context.to_vec(), negatives.to_vec());
                    match which {
                        0 => c[i] += delta,
                        1 => o[i] += delta,
                        k => n[k - 2][i] += delta,
                    }
                    loss(&c, &o, &n)
                };
                (eval(h) - eval(-h)) / (2.0 * h)
            })
            .collect()
    };
    let mut worst = rel_err(&g.center, &numeric(0, center.len()));
    worst = worst.max(rel_err(&g.context, &numeric(1, context.len())));
    for (k, gn) in g.negatives.iter().enumerate() {
        worst = worst.max(rel_err(gn, &numeric(k + 2, gn.len())));
    }
    worst
}

/// Random proper rotation (determinant +1), row-major d × d.
pub fn random_rotation(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let mut m = random_orthogonal(rng, d);
    let det = nalgebra::DMatrix::from_row_slice(d, d, &m).determinant();
    if det < 0.0 {
        for v in &mut m[..d] {
            *v = -*v;
        }
    }
    m
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn brute_w2(x: &PointCloud, y: &PointCloud) -> f64 {
    permutations(x.len())
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| dist2(x.row(i), y.row(j))).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

pub fn brute_hausdorff(x: &PointCloud, y: &PointCloud) -> f64 {
    let directed = |a: &PointCloud, b: &PointCloud| {
        a.rows()
            .map(|p| b.rows().map(|q| dist2(p, q).sqrt()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(x, y).max(directed(y, x))
}

/// Exact two-sided signed-rank p-value by visiting all 2^n sign patterns.
pub fn sign_flip_p(a: &[f64], b: &[f64]) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return 1.0;
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let observed = w_plus.min(total - w_plus);
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            extreme += 1;
        }
    }
    (2.0 * extreme as f64 / (1u64 << n) as f64).min(1.0)
}

/// Standard normal draws by the Box-Muller transform.
pub fn normal_sample(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = 1.0 - r.random::<f64>();
            let v: f64 = r.random();
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        })
        .collect()
}

pub fn false_positive_rate(n: usize, seed: u64, test: impl Fn(&[f64], &[f64]) -> f64) -> f64 {
    let mut r = rng(seed);
    let rejections = (0..2000)
        .filter(|_| {
            let a = normal_sample(&mut r, n);
            let b = normal_sample(&mut r, n);
            test(&a, &b) < 0.05
        })
        .count();
    rejections as f64 / 2000.0
}
