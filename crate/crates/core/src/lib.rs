//! Stability and quality measurements for node2vec embeddings.
//!
//! The pipeline runs from a graph to a seeded walk corpus, through a
//! skip-gram trainer to a point cloud, and then to distances between clouds,
//! link-reconstruction quality and rank tests across hyperparameter groups:
//!
//! ```no_run
//! use n2vlab_core::{graph, metrics, skipgram, walks};
//!
//! let g = graph::les_miserables(false);
//! let params = walks::WalkParams { walk_length: 10, walks_per_node: 10, p: 1.0, q: 1.0, seed: 7 };
//! let corpus = walks::build_corpus(&g, &params)?;
//! let a = skipgram::train(&corpus, &skipgram::EmbedParams::new(16, 5, 1))?.cloud;
//! let b = skipgram::train(&corpus, &skipgram::EmbedParams::new(16, 5, 2))?.cloud;
//! let (a, b) = (metrics::normalize_diameter(&a)?, metrics::normalize_diameter(&b)?);
//! println!("W2 = {}", metrics::wasserstein2(&a, &b)?);
//! # Ok::<(), n2vlab_core::Error>(())
//! ```

pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod pointcloud;
pub mod quality;
pub mod rng;
pub mod skipgram;
pub mod stats;
pub mod walks;

pub use error::{Error, Result};
pub use graph::Graph;
pub use pointcloud::PointCloud;
