//! Stability measurements on point clouds: normalization, Hausdorff and
//! Wasserstein-2 distances, Procrustes alignment, pooling and PCA.

pub mod assignment;
pub mod distance;
pub mod pca;
pub mod procrustes;
pub mod summary;

pub use distance::{
    hausdorff, normalize_diameter, pairwise, wasserstein2, wasserstein2_transport, CloudMetric, Transport,
};
pub use pca::{project_pca, Projection};
pub use procrustes::{pool_embeddings, procrustes_align, Alignment};
pub use summary::{median, DistanceMatrixSummary, DistributionSummary, GroupDistances};
