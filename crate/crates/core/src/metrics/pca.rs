//! Principal component projection, used for plot data only.

use nalgebra::{DMatrix, SymmetricEigen};

use super::procrustes::{center, from_matrix, to_matrix};
use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

#[derive(Debug, Clone)]
pub struct Projection {
    /// `n × k` scores on the leading principal directions.
    pub scores: PointCloud,
    /// Share of total variance carried by each kept direction.
    pub explained_variance_ratio: Vec<f64>,
    /// Covariance eigenvalues in descending order (all `d` of them).
    pub eigenvalues: Vec<f64>,
    /// `d × k` matrix of principal directions (columns).
    pub components: DMatrix<f64>,
}

/// Projects the mean-centered cloud onto its top `k` principal directions.
pub fn project_pca(x: &PointCloud, k: usize) -> Result<Projection> {
    if k > x.dim() {
        return Err(Error::InvalidParameter(format!("cannot keep {k} of {} dimensions", x.dim())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter("PCA needs at least two points".into()));
    }
    let (xc, _) = center(&to_matrix(x));
    let cov = xc.transpose() * &xc / (x.len() as f64 - 1.0);
    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..x.dim()).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let explained_variance_ratio = eigenvalues[..k]
        .iter()
        .map(|&l| if total > 0.0 { l / total } else { 0.0 })
        .collect();
    let mut components = DMatrix::zeros(x.dim(), k);
    for (c, &i) in order[..k].iter().enumerate() {
        components.set_column(c, &eigen.eigenvectors.column(i));
    }
    let scores = from_matrix(&(&xc * &components), x)?;
    Ok(Projection { scores, explained_variance_ratio, eigenvalues, components })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_have_one_component() {
        let x = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [-3.0, -6.0]]).unwrap();
        let p = project_pca(&x, 1).unwrap();
        assert!((p.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert_eq!(p.scores.dim(), 1);
        assert_eq!(p.scores.len(), 4);
    }

    #[test]
    fn full_rank_keeps_all_variance() {
        let x = PointCloud::from_rows(&[[0.0, 1.0, 2.0], [1.0, -1.0, 0.5], [2.0, 0.3, -1.0], [0.4, 0.4, 0.4]]).unwrap();
        let p = project_pca(&x, 3).unwrap();
        let sum: f64 = p.explained_variance_ratio.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        assert!(project_pca(&x, 4).is_err());
    }
}
