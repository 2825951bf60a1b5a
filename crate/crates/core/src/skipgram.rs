//! Skip-gram with negative sampling (SGNS) over a walk corpus.
//!
//! Every center position `t` of every walk pairs with the nodes at offsets
//! `1..=window` on both sides (clipped at the walk ends). A positive pair
//! `(c, o)` contributes `-ln σ(x_c·y_o)` and each of the `k` sampled
//! negatives `n` contributes `-ln σ(-x_c·y_n)`. Center vectors `x` start
//! uniform in `[-0.5/d, 0.5/d)`, context vectors `y` start at zero, and plain
//! SGD runs with a learning rate that decays linearly to a floor.

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointcloud::{PointCloud, Provenance};
use crate::rng::{stream_rng, Stream};
use crate::walks::WalkCorpus;

/// Which learned matrix is published as the embedding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingOutput {
    #[default]
    Center,
    Context,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedParams {
    pub dim: usize,
    /// Context offsets `1..=window` on each side of the center.
    pub window: usize,
    pub epochs_max: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub negatives: usize,
    pub early_stop_patience: usize,
    /// Required improvement, as a fraction of the first epoch's mean loss.
    pub early_stop_min_delta: f64,
    #[serde(default)]
    pub output: EmbeddingOutput,
    pub seed: u64,
}

impl EmbedParams {
    pub fn new(dim: usize, window: usize, seed: u64) -> Self {
        EmbedParams {
            dim,
            window,
            epochs_max: 5,
            learning_rate: 0.025,
            min_learning_rate: 1e-4,
            negatives: 5,
            early_stop_patience: 2,
            early_stop_min_delta: 1e-4,
            output: EmbeddingOutput::Center,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 || self.window < 1 || self.epochs_max < 1 || self.negatives < 1 {
            return Err(Error::InvalidParameter(
                "dim, window, epochs_max and negatives must all be ≥ 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) || self.min_learning_rate < 0.0 {
            return Err(Error::InvalidParameter("learning rate must be positive".into()));
        }
        if !(self.early_stop_min_delta >= 0.0) {
            return Err(Error::InvalidParameter("early-stopping delta must be nonnegative".into()));
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(s)`, evaluated without overflow.
#[inline]
pub fn neg_log_sigmoid(s: f64) -> f64 {
    if s > 0.0 {
        (-s).exp().ln_1p()
    } else {
        -s + s.exp().ln_1p()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss and gradients of one SGNS term group.
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGradients {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Analytic gradients of
/// `-ln σ(x·y) - Σ_n ln σ(-x·y_n)` with respect to `x`, `y` and each `y_n`.
pub fn sgns_gradients(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> Result<SgnsGradients> {
    let d = center.len();
    for v in std::iter::once(context).chain(negatives.iter().copied()) {
        if v.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: v.len() });
        }
    }
    let s = dot(center, context);
    let g = sigmoid(s) - 1.0;
    let mut loss = neg_log_sigmoid(s);
    let mut grad_center: Vec<f64> = context.iter().map(|y| g * y).collect();
    let grad_context = center.iter().map(|x| g * x).collect();
    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let s = dot(center, neg);
        let g = sigmoid(s);
        loss += neg_log_sigmoid(-s);
        for (gc, y) in grad_center.iter_mut().zip(neg.iter()) {
            *gc += g * y;
        }
        grad_negatives.push(center.iter().map(|x| g * x).collect());
    }
    Ok(SgnsGradients { loss, center: grad_center, context: grad_context, negatives: grad_negatives })
}

/// Draws nodes with probability proportional to `frequency^0.75`.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    dist: WeightedIndex<f64>,
}

impl NegativeSampler {
    pub fn from_frequencies(freqs: &[u64]) -> Result<Self> {
        let weights: Vec<f64> = freqs.iter().map(|&f| (f as f64).powf(0.75)).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidParameter(format!("negative-sampling table: {e}")))?;
        Ok(NegativeSampler { dist })
    }

    pub fn from_corpus(corpus: &WalkCorpus) -> Result<Self> {
        NegativeSampler::from_frequencies(&corpus.frequencies())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

/// Patience-based early stopping on a per-epoch loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    best: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping { patience, min_delta, best: f64::INFINITY, stale: 0 }
    }

    pub fn set_min_delta(&mut self, min_delta: f64) {
        self.min_delta = min_delta;
    }

    /// Records one epoch; returns `true` when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best - self.min_delta {
            self.best = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.patience > 0 && self.stale >= self.patience
    }
}

/// Mean term loss of each completed epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTrace(pub Vec<f64>);

impl LossTrace {
    pub fn epochs(&self) -> usize {
        self.0.len()
    }

    pub fn first(&self) -> Option<f64> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.0.last().copied()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub cloud: PointCloud,
    pub loss: LossTrace,
}

/// Flat parameter storage shared by the sequential and the hogwild trainer.
trait Weights {
    fn get(&self, i: usize) -> f64;
    fn add(&self, i: usize, delta: f64);
}

struct AtomicWeights(Vec<AtomicU64>);

impl AtomicWeights {
    fn from_vec(v: Vec<f64>) -> Self {
        AtomicWeights(v.into_iter().map(|x| AtomicU64::new(x.to_bits())).collect())
    }

    fn into_vec(self) -> Vec<f64> {
        self.0.into_iter().map(|a| f64::from_bits(a.into_inner())).collect()
    }
}

impl Weights for AtomicWeights {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        f64::from_bits(self.0[i].load(Ordering::Relaxed))
    }

    // Racy read-modify-write: concurrent updates may be lost.
    #[inline]
    fn add(&self, i: usize, delta: f64) {
        let v = self.get(i) + delta;
        self.0[i].store(v.to_bits(), Ordering::Relaxed);
    }
}

struct Model<'a, W> {
    centers: &'a W,
    contexts: &'a W,
    dim: usize,
}

impl<W: Weights> Model<'_, W> {
    /// One SGD step on a positive pair plus `k` negatives. Returns the summed
    /// loss and the number of terms it covers.
    fn step<R: Rng + ?Sized>(
        &self,
        center: usize,
        context: usize,
        lr: f64,
        params: &EmbedParams,
        sampler: &NegativeSampler,
        rng: &mut R,
        grad: &mut [f64],
    ) -> (f64, usize) {
        let d = self.dim;
        let (xc, yo) = (center * d, context * d);
        grad.iter_mut().for_each(|g| *g = 0.0);

        let apply = |target_row: usize, label: f64, grad: &mut [f64]| -> f64 {
            let mut s = 0.0;
            for k in 0..d {
                s += self.centers.get(xc + k) * self.contexts.get(target_row + k);
            }
            let g = sigmoid(s) - label;
            for (k, gk) in grad.iter_mut().enumerate() {
                *gk += g * self.contexts.get(target_row + k);
                self.contexts.add(target_row + k, -lr * g * self.centers.get(xc + k));
            }
            if label > 0.5 { neg_log_sigmoid(s) } else { neg_log_sigmoid(-s) }
        };

        let mut loss = apply(yo, 1.0, grad);
        let mut terms = 1;
        for _ in 0..params.negatives {
            let neg = sampler.sample(rng);
            if neg == context {
                continue;
            }
            loss += apply(neg * d, 0.0, grad);
            terms += 1;
        }
        for (k, gk) in grad.iter().enumerate() {
            self.centers.add(xc + k, -lr * gk);
        }
        (loss, terms)
    }
}

struct PlainWeights(Vec<Cell<f64>>);

impl PlainWeights {
    fn from_vec(v: Vec<f64>) -> Self {
        PlainWeights(v.into_iter().map(Cell::new).collect())
    }

    fn into_vec(self) -> Vec<f64> {
        self.0.into_iter().map(Cell::into_inner).collect()
    }
}

impl Weights for PlainWeights {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        self.0[i].get()
    }

    #[inline]
    fn add(&self, i: usize, delta: f64) {
        self.0[i].set(self.0[i].get() + delta);
    }
}

fn check_corpus(corpus: &WalkCorpus) -> Result<Vec<u64>> {
    if corpus.is_empty() {
        return Err(Error::InvalidParameter("walk corpus is empty".into()));
    }
    let freqs = corpus.frequencies();
    if let Some(missing) = freqs.iter().position(|&f| f == 0) {
        return Err(Error::NodeNotInCorpus(missing));
    }
    Ok(freqs)
}

fn init_weights(n: usize, params: &EmbedParams) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(params.seed, Stream::Init, 0, 0);
    let half = 0.5 / params.dim as f64;
    let centers = (0..n * params.dim).map(|_| rng.random_range(-half..half)).collect();
    (centers, vec![0.0; n * params.dim])
}

fn finish(
    corpus: &WalkCorpus,
    params: &EmbedParams,
    centers: Vec<f64>,
    contexts: Vec<f64>,
    loss: LossTrace,
) -> Result<TrainOutput> {
    let data = match params.output {
        EmbeddingOutput::Center => centers,
        EmbeddingOutput::Context => contexts,
        EmbeddingOutput::Sum => centers.iter().zip(&contexts).map(|(a, b)| a + b).collect(),
    };
    let cloud = PointCloud::new(corpus.num_nodes, params.dim, data)?
        .with_graph_id(corpus.graph_id.clone())
        .with_provenance(Provenance {
            walk: Some(corpus.params),
            embed: Some(*params),
            init: Some("center ~ U[-0.5/d, 0.5/d), context = 0".into()),
            ..Default::default()
        });
    Ok(TrainOutput { cloud, loss })
}

/// Trains a single-threaded SGNS model. Equal inputs give bit-identical output.
pub fn train(corpus: &WalkCorpus, params: &EmbedParams) -> Result<TrainOutput> {
    params.validate()?;
    let freqs = check_corpus(corpus)?;
    let sampler = NegativeSampler::from_frequencies(&freqs)?;
    let (centers, contexts) = init_weights(corpus.num_nodes, params);
    let centers = PlainWeights::from_vec(centers);
    let contexts = PlainWeights::from_vec(contexts);
    let model = Model { centers: &centers, contexts: &contexts, dim: params.dim };

    let mut rng = stream_rng(params.seed, Stream::Negatives, 0, 0);
    let mut grad = vec![0.0; params.dim];
    let tokens = corpus.num_tokens();
    let planned = (params.epochs_max * tokens) as f64;
    let mut processed = 0usize;
    let mut stopper = EarlyStopping::new(params.early_stop_patience, 0.0);
    let mut trace = Vec::new();

    for epoch in 0..params.epochs_max {
        let (mut loss_sum, mut terms) = (0.0, 0usize);
        for walk in &corpus.walks {
            for t in 0..walk.len() {
                let lr = (params.learning_rate * (1.0 - processed as f64 / planned)).max(params.min_learning_rate);
                processed += 1;
                let lo = t.saturating_sub(params.window);
                let hi = (t + params.window).min(walk.len() - 1);
                for j in lo..=hi {
                    if j == t {
                        continue;
                    }
                    let (l, k) = model.step(walk[t], walk[j], lr, params, &sampler, &mut rng, &mut grad);
                    loss_sum += l;
                    terms += k;
                }
            }
        }
        let mean = if terms > 0 { loss_sum / terms as f64 } else { 0.0 };
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: epoch + 1 });
        }
        trace.push(mean);
        if epoch == 0 {
            stopper.set_min_delta(params.early_stop_min_delta * mean);
        }
        if stopper.observe(mean) {
            log::debug!("early stop after epoch {}", epoch + 1);
            break;
        }
    }
    finish(corpus, params, centers.into_vec(), contexts.into_vec(), LossTrace(trace))
}

/// Lock-free parallel training over `threads` workers. Updates race, so the
/// result is not reproducible; use [`train`] whenever determinism matters.
pub fn train_hogwild(corpus: &WalkCorpus, params: &EmbedParams, threads: usize) -> Result<TrainOutput> {
    params.validate()?;
    let freqs = check_corpus(corpus)?;
    let sampler = NegativeSampler::from_frequencies(&freqs)?;
    let (centers, contexts) = init_weights(corpus.num_nodes, params);
    let centers = AtomicWeights::from_vec(centers);
    let contexts = AtomicWeights::from_vec(contexts);
    let model = Model { centers: &centers, contexts: &contexts, dim: params.dim };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;

    let chunk = corpus.walks.len().div_ceil(threads.max(1) * 4).max(1);
    let planned = (params.epochs_max * corpus.num_tokens()) as f64;
    let processed = AtomicU64::new(0);
    let mut stopper = EarlyStopping::new(params.early_stop_patience, 0.0);
    let mut trace = Vec::new();

    for epoch in 0..params.epochs_max {
        let (loss_sum, terms) = pool.install(|| {
            corpus
                .walks
                .par_chunks(chunk)
                .enumerate()
                .map(|(ci, walks)| {
                    let mut rng = stream_rng(params.seed, Stream::Negatives, epoch as u64, ci as u64);
                    let mut grad = vec![0.0; params.dim];
                    let (mut loss, mut terms) = (0.0, 0usize);
                    for walk in walks {
                        for t in 0..walk.len() {
                            let done = processed.fetch_add(1, Ordering::Relaxed) as f64;
                            let lr = (params.learning_rate * (1.0 - done / planned)).max(params.min_learning_rate);
                            let lo = t.saturating_sub(params.window);
                            let hi = (t + params.window).min(walk.len() - 1);
                            for j in (lo..=hi).filter(|&j| j != t) {
                                let (l, k) = model.step(walk[t], walk[j], lr, params, &sampler, &mut rng, &mut grad);
                                loss += l;
                                terms += k;
                            }
                        }
                    }
                    (loss, terms)
                })
                .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
        });
        let mean = if terms > 0 { loss_sum / terms as f64 } else { 0.0 };
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: epoch + 1 });
        }
        trace.push(mean);
        if epoch == 0 {
            stopper.set_min_delta(params.early_stop_min_delta * mean);
        }
        if stopper.observe(mean) {
            break;
        }
    }
    finish(corpus, params, centers.into_vec(), contexts.into_vec(), LossTrace(trace))
}
