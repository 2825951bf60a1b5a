//! Orthogonal Procrustes alignment and embedding pooling.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pointcloud::PointCloud;

pub(crate) fn to_matrix(x: &PointCloud) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.len(), x.dim(), x.as_slice())
}

pub(crate) fn from_matrix(m: &DMatrix<f64>, like: &PointCloud) -> Result<PointCloud> {
    let mut data = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        data.extend(m.row(i).iter());
    }
    Ok(PointCloud::new(m.nrows(), m.ncols(), data)?
        .with_graph_id(like.graph_id.clone())
        .with_provenance(like.provenance.clone()))
}

/// Subtracts column means; returns the centered matrix and the mean row.
pub(crate) fn center(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let mean = m.row_mean();
    let mut centered = m.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    (centered, DMatrix::from_row_slice(1, m.ncols(), mean.as_slice()))
}

#[derive(Debug, Clone)]
pub struct Alignment {
    /// `x` mapped onto `y`: centered, rotated, then moved to `y`'s centroid.
    pub aligned: PointCloud,
    /// Orthogonal `d × d` matrix acting on row vectors.
    pub rotation: DMatrix<f64>,
    /// Frobenius norm of `aligned - y`.
    pub residual: f64,
}

/// Finds the orthogonal map that best carries `x` onto `y` after both are
/// mean-centered, from the SVD of the cross-covariance `Xᵀ Y`. Without
/// `allow_reflection` the map is restricted to proper rotations.
pub fn procrustes_align(x: &PointCloud, y: &PointCloud, allow_reflection: bool) -> Result<Alignment> {
    if x.len() != y.len() || x.dim() != y.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cannot align a {}×{} cloud to a {}×{} cloud",
            x.len(),
            x.dim(),
            y.len(),
            y.dim()
        )));
    }
    let (xc, _) = center(&to_matrix(x));
    let (yc, y_mean) = center(&to_matrix(y));
    let cross = xc.transpose() * &yc;
    let svd = cross.svd(true, true);
    let mut u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    if !allow_reflection && (&u * &v_t).determinant() < 0.0 {
        let weakest = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut col = u.column_mut(weakest);
        col *= -1.0;
    }
    let rotation = &u * &v_t;
    let mut aligned = &xc * &rotation;
    for mut row in aligned.row_iter_mut() {
        row += &y_mean;
    }
    let residual = (&aligned - to_matrix(y)).norm();
    Ok(Alignment { aligned: from_matrix(&aligned, x)?, rotation, residual })
}

/// Row-wise mean of several embeddings of the same graph, optionally after
/// aligning each of them to the first.
pub fn pool_embeddings(clouds: &[PointCloud], align_first: bool) -> Result<PointCloud> {
    let reference = clouds
        .first()
        .ok_or_else(|| Error::InvalidParameter("cannot pool an empty list of clouds".into()))?;
    let mut sum = to_matrix(reference);
    for cloud in &clouds[1..] {
        if cloud.len() != reference.len() || cloud.dim() != reference.dim() {
            return Err(Error::ShapeMismatch("pooled clouds must share their shape".into()));
        }
        if align_first {
            sum += to_matrix(&procrustes_align(cloud, reference, false)?.aligned);
        } else {
            sum += to_matrix(cloud);
        }
    }
    sum /= clouds.len() as f64;
    from_matrix(&sum, reference)
}
