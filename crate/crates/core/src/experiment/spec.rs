//! Experiment configuration: parameter grid, graph source, metrics.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Graph, SbmSpec};
use crate::metrics::CloudMetric;
use crate::quality::QualityMetric;
use crate::rng::stable_hash;
use crate::skipgram::{EmbedParams, EmbeddingOutput};
use crate::stats::TestKind;
use crate::walks::WalkParams;

/// One cell of the hyperparameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub dim: usize,
    pub window: usize,
    pub p: f64,
    pub q: f64,
}

impl ParamSet {
    /// Canonical label `L{L}-N{N}-d{d}-C{C}-p{p}-q{q}`.
    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn from_label(label: &str) -> Result<ParamSet> {
        let bad = || Error::InvalidParameter(format!("malformed parameter-set label {label:?}"));
        let parts: Vec<&str> = label.split('-').collect();
        if parts.len() != 6 {
            return Err(bad());
        }
        let field = |i: usize, prefix: &str| parts[i].strip_prefix(prefix).ok_or_else(bad);
        let int = |i: usize, prefix: &str| -> Result<usize> { field(i, prefix)?.parse().map_err(|_| bad()) };
        let real = |i: usize, prefix: &str| -> Result<f64> { field(i, prefix)?.parse().map_err(|_| bad()) };
        Ok(ParamSet {
            walk_length: int(0, "L")?,
            walks_per_node: int(1, "N")?,
            dim: int(2, "d")?,
            window: int(3, "C")?,
            p: real(4, "p")?,
            q: real(5, "q")?,
        })
    }

    fn key(&self) -> (usize, usize, usize, usize, f64, f64) {
        (self.walk_length, self.walks_per_node, self.dim, self.window, self.p, self.q)
    }

    pub fn walk_params(&self, seed: u64) -> WalkParams {
        WalkParams { walk_length: self.walk_length, walks_per_node: self.walks_per_node, p: self.p, q: self.q, seed }
    }
}

impl fmt::Display for ParamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "L{}-N{}-d{}-C{}-p{}-q{}",
            self.walk_length, self.walks_per_node, self.dim, self.window, self.p, self.q
        )
    }
}

/// Hamming distance: the number of the six fields on which `a` and `b` differ.
pub fn param_distance(a: &ParamSet, b: &ParamSet) -> usize {
    let (x, y) = (a.key(), b.key());
    [x.0 != y.0, x.1 != y.1, x.2 != y.2, x.3 != y.3, x.4 != y.4, x.5 != y.5]
        .into_iter()
        .filter(|&d| d)
        .count()
}

fn default_walks_per_node() -> Vec<usize> {
    vec![10]
}

fn default_bias() -> Vec<f64> {
    vec![1.0]
}

/// Value lists per hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub walk_length: Vec<usize>,
    #[serde(default = "default_walks_per_node")]
    pub walks_per_node: Vec<usize>,
    pub dim: Vec<usize>,
    pub window: Vec<usize>,
    #[serde(default = "default_bias")]
    pub p: Vec<f64>,
    #[serde(default = "default_bias")]
    pub q: Vec<f64>,
}

fn sorted_unique<T: Copy + PartialOrd>(values: &[T]) -> Vec<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("grid values are comparable"));
    v.dedup_by(|a, b| a == b);
    v
}

/// Cartesian product of the grid in ascending `(L, N, d, C, p, q)` order.
pub fn enumerate_grid(grid: &Grid) -> Result<Vec<ParamSet>> {
    let lists = [
        ("walk_length", grid.walk_length.is_empty()),
        ("walks_per_node", grid.walks_per_node.is_empty()),
        ("dim", grid.dim.is_empty()),
        ("window", grid.window.is_empty()),
        ("p", grid.p.is_empty()),
        ("q", grid.q.is_empty()),
    ];
    if let Some((name, _)) = lists.iter().find(|(_, empty)| *empty) {
        return Err(Error::InvalidParameter(format!("grid list {name:?} is empty")));
    }
    if grid.walk_length.contains(&0) || grid.walks_per_node.contains(&0) || grid.dim.contains(&0) || grid.window.contains(&0) {
        return Err(Error::InvalidParameter("grid counts must be positive".into()));
    }
    if grid.p.iter().chain(&grid.q).any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidParameter("walk biases must be positive".into()));
    }
    let mut out = Vec::new();
    for &walk_length in &sorted_unique(&grid.walk_length) {
        for &walks_per_node in &sorted_unique(&grid.walks_per_node) {
            for &dim in &sorted_unique(&grid.dim) {
                for &window in &sorted_unique(&grid.window) {
                    for &p in &sorted_unique(&grid.p) {
                        for &q in &sorted_unique(&grid.q) {
                            out.push(ParamSet { walk_length, walks_per_node, dim, window, p, q });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Where the experiment's graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSource {
    /// An edge-list file; relative paths resolve against the spec file.
    File {
        path: PathBuf,
        #[serde(default)]
        weighted: bool,
        #[serde(default)]
        id: Option<String>,
    },
    /// The bundled Les Misérables network.
    Lesmis {
        #[serde(default)]
        weighted: bool,
    },
    Sbm(SbmSpec),
    Er { n: usize, p: f64, seed: u64 },
}

impl GraphSource {
    pub fn load(&self, base: &Path) -> Result<Graph> {
        match self {
            GraphSource::File { path, weighted, id } => {
                let g = graph::load_graph_file(&base.join(path), *weighted)?;
                Ok(match id {
                    Some(id) => g.with_id(id.clone()),
                    None => g,
                })
            }
            GraphSource::Lesmis { weighted } => Ok(graph::les_miserables(*weighted)),
            GraphSource::Sbm(spec) => graph::generate_sbm(spec),
            GraphSource::Er { n, p, seed } => graph::generate_er(*n, *p, *seed),
        }
    }
}

/// Training settings shared by every cell; `dim`, `window` and the seed come
/// from the grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingSpec {
    pub epochs_max: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub negatives: usize,
    pub early_stop_patience: usize,
    pub early_stop_min_delta: f64,
    pub output: EmbeddingOutput,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        let d = EmbedParams::new(1, 1, 0);
        TrainingSpec {
            epochs_max: d.epochs_max,
            learning_rate: d.learning_rate,
            min_learning_rate: d.min_learning_rate,
            negatives: d.negatives,
            early_stop_patience: d.early_stop_patience,
            early_stop_min_delta: d.early_stop_min_delta,
            output: d.output,
        }
    }
}

impl TrainingSpec {
    pub fn embed_params(&self, cell: &ParamSet, seed: u64) -> EmbedParams {
        EmbedParams {
            dim: cell.dim,
            window: cell.window,
            epochs_max: self.epochs_max,
            learning_rate: self.learning_rate,
            min_learning_rate: self.min_learning_rate,
            negatives: self.negatives,
            early_stop_patience: self.early_stop_patience,
            early_stop_min_delta: self.early_stop_min_delta,
            output: self.output,
            seed,
        }
    }
}

fn default_distances() -> Vec<CloudMetric> {
    CloudMetric::ALL.to_vec()
}

fn default_quality() -> Vec<QualityMetric> {
    QualityMetric::ALL.to_vec()
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSpec {
    #[serde(default = "default_distances")]
    pub distances: Vec<CloudMetric>,
    #[serde(default = "default_quality")]
    pub quality: Vec<QualityMetric>,
    /// Also compare clouds across groups (repeat `i` of one group against
    /// repeat `i` of another), which feeds the rank correlation.
    #[serde(default = "yes")]
    pub cross_group: bool,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        MetricsSpec { distances: default_distances(), quality: default_quality(), cross_group: true }
    }
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSpec {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub test: TestKind,
}

impl Default for StatsSpec {
    fn default() -> Self {
        StatsSpec { alpha: default_alpha(), test: TestKind::default() }
    }
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub graph: GraphSource,
    pub grid: Grid,
    pub repeats: usize,
    pub experiment_seed: u64,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default)]
    pub training: TrainingSpec,
    #[serde(default)]
    pub stats: StatsSpec,
    pub output_dir: PathBuf,
    /// Directory that relative paths resolve against; set by [`ExperimentSpec::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentSpec {
    /// Reads a JSON or TOML spec (chosen by extension; JSON otherwise).
    pub fn load(path: &Path) -> Result<ExperimentSpec> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: ExperimentSpec = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text)?
        } else {
            serde_json::from_str(&text)?
        };
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        enumerate_grid(&self.grid)?;
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be at least 1".into()));
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(Error::InvalidParameter("alpha must lie in (0, 1)".into()));
        }
        self.training.embed_params(&ParamSet { walk_length: 1, walks_per_node: 1, dim: 1, window: 1, p: 1.0, q: 1.0 }, 0).validate()
    }

    pub fn output_path(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    pub fn load_graph(&self) -> Result<Graph> {
        self.graph.load(&self.base_dir)
    }
}

/// Seed of one cell, a stable hash of the experiment seed, the canonical
/// parameter label and the repeat index.
pub fn cell_seed(experiment_seed: u64, cell: &ParamSet, repeat: usize) -> u64 {
    stable_hash(&[
        &experiment_seed.to_le_bytes(),
        cell.label().as_bytes(),
        &(repeat as u64).to_le_bytes(),
    ])
}
