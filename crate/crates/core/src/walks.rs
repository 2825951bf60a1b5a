//! Second-order (p, q)-biased random walks.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{stream_rng, Stream};

/// Walk configuration. `walk_length` counts steps, so a full walk holds
/// `walk_length + 1` node ids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub walk_length: usize,
    pub walks_per_node: usize,
    /// Return bias: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out bias: weight `1/q` for moving two hops away from the previous node.
    pub q: f64,
    pub seed: u64,
}

impl WalkParams {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 1 || self.walks_per_node < 1 {
            return Err(Error::InvalidParameter("walk length and walks per node must be ≥ 1".into()));
        }
        if !(self.p > 0.0 && self.p.is_finite() && self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "walk biases must be positive, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        Ok(())
    }
}

#[inline]
fn bias(g: &Graph, prev: Option<usize>, next: usize, p: f64, q: f64) -> f64 {
    match prev {
        None => 1.0,
        Some(t) if t == next => 1.0 / p,
        Some(t) if g.has_edge(t, next) => 1.0,
        Some(_) => 1.0 / q,
    }
}

/// Draws the successor of `cur` given the previous node `prev`.
///
/// Each neighbor `x` is chosen with probability proportional to
/// `w(cur, x) * alpha(prev, x)`; `None` means `cur` is isolated.
pub fn walk_step<R: Rng + ?Sized>(
    g: &Graph,
    prev: Option<usize>,
    cur: usize,
    p: f64,
    q: f64,
    rng: &mut R,
) -> Result<Option<usize>> {
    if cur >= g.num_nodes() {
        return Err(Error::InvalidNode(cur));
    }
    if let Some(t) = prev {
        if t >= g.num_nodes() {
            return Err(Error::InvalidNode(t));
        }
    }
    let neighbors = g.neighbors(cur);
    if neighbors.is_empty() {
        return Ok(None);
    }
    let total: f64 = neighbors.iter().map(|&(x, w)| w * bias(g, prev, x, p, q)).sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for &(x, w) in neighbors {
        acc += w * bias(g, prev, x, p, q);
        if target < acc {
            return Ok(Some(x));
        }
    }
    // Rounding can leave `target` a hair above the final partial sum.
    Ok(neighbors.last().map(|&(x, _)| x))
}

/// Simulates one walk of up to `params.walk_length` steps from `start`.
pub fn simulate_walk<R: Rng + ?Sized>(g: &Graph, start: usize, params: &WalkParams, rng: &mut R) -> Result<Vec<usize>> {
    let mut walk = Vec::with_capacity(params.walk_length + 1);
    walk.push(start);
    let mut prev = None;
    let mut cur = start;
    for _ in 0..params.walk_length {
        match walk_step(g, prev, cur, params.p, params.q, rng)? {
            Some(next) => {
                walk.push(next);
                prev = Some(cur);
                cur = next;
            }
            None => break,
        }
    }
    Ok(walk)
}

/// All walks of one corpus, ordered by start node then repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkCorpus {
    pub walks: Vec<Vec<usize>>,
    pub params: WalkParams,
    pub graph_id: String,
    pub num_nodes: usize,
}

impl WalkCorpus {
    pub fn len(&self) -> usize {
        self.walks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.walks.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.walks.iter().map(Vec::len).sum()
    }

    /// Occurrence count of every node across all walks.
    pub fn frequencies(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_nodes];
        for walk in &self.walks {
            for &v in walk {
                counts[v] += 1;
            }
        }
        counts
    }

    /// Debug dump: one walk per line, space-separated node ids.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for walk in &self.walks {
            let line: Vec<String> = walk.iter().map(usize::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Builds `walks_per_node` walks from every node.
///
/// Walk `(v, r)` draws from its own sub-stream keyed by `(seed, v, r)`, so
/// the corpus is identical regardless of how the work is scheduled.
pub fn build_corpus(g: &Graph, params: &WalkParams) -> Result<WalkCorpus> {
    params.validate()?;
    if g.num_nodes() == 0 {
        return Err(Error::EmptyGraph);
    }
    let per_node: Vec<Vec<Vec<usize>>> = (0..g.num_nodes())
        .into_par_iter()
        .map(|v| {
            (0..params.walks_per_node)
                .map(|r| {
                    let mut rng = stream_rng(params.seed, Stream::Walks, v as u64, r as u64);
                    simulate_walk(g, v, params, &mut rng)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WalkCorpus {
        walks: per_node.into_iter().flatten().collect(),
        params: *params,
        graph_id: g.id().to_string(),
        num_nodes: g.num_nodes(),
    })
}
