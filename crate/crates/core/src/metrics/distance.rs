//! Diameter normalization and distances between point clouds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assignment;
use crate::error::{Error, Result};
use crate::pointcloud::{squared_distance, PointCloud};

/// Rescales `x` about the origin so that its diameter is exactly one.
pub fn normalize_diameter(x: &PointCloud) -> Result<PointCloud> {
    let diameter = x.diameter();
    if !(diameter > 0.0) {
        return Err(Error::Degenerate("cannot normalize a cloud of diameter 0".into()));
    }
    let mut out = x.map_values(|v| v / diameter);
    out.provenance.normalized = true;
    Ok(out)
}

fn check_dims(x: &PointCloud, y: &PointCloud) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), found: y.dim() });
    }
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidParameter("point clouds must be nonempty".into()));
    }
    Ok(())
}

fn directed_hausdorff_sq(x: &PointCloud, y: &PointCloud) -> f64 {
    x.rows()
        .map(|a| y.rows().map(|b| squared_distance(a, b)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance under the Euclidean metric.
pub fn hausdorff(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    check_dims(x, y)?;
    Ok(directed_hausdorff_sq(x, y).max(directed_hausdorff_sq(y, x)).sqrt())
}

/// Wasserstein-2 value together with the optimal bijection.
#[derive(Debug, Clone, PartialEq)]
pub struct Transport {
    pub distance: f64,
    /// `matching[i]` is the row of `y` that row `i` of `x` is sent to.
    pub matching: Vec<usize>,
}

/// Exact Wasserstein-2 distance between equal-size clouds: the square root of
/// the least total squared displacement over all bijections.
pub fn wasserstein2(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    Ok(wasserstein2_transport(x, y)?.distance)
}

pub fn wasserstein2_transport(x: &PointCloud, y: &PointCloud) -> Result<Transport> {
    check_dims(x, y)?;
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "Wasserstein-2 needs equal cardinalities, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    let mut cost = Vec::with_capacity(n * n);
    for a in x.rows() {
        cost.extend(y.rows().map(|b| squared_distance(a, b)));
    }
    let solved = assignment::solve(&cost, n)?;
    Ok(Transport { distance: solved.cost.max(0.0).sqrt(), matching: solved.row_to_col })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudMetric {
    Hausdorff,
    Wasserstein2,
}

impl CloudMetric {
    pub const ALL: [CloudMetric; 2] = [CloudMetric::Hausdorff, CloudMetric::Wasserstein2];

    pub fn name(self) -> &'static str {
        match self {
            CloudMetric::Hausdorff => "hausdorff",
            CloudMetric::Wasserstein2 => "wasserstein2",
        }
    }

    pub fn parse(name: &str) -> Option<CloudMetric> {
        CloudMetric::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Evaluates the metric, zero-padding the lower-dimensional cloud when
    /// dimensions differ (the isometric inclusion of R^d into R^d').
    pub fn eval(self, x: &PointCloud, y: &PointCloud) -> Result<f64> {
        let (px, py);
        let (x, y) = if x.dim() == y.dim() {
            (x, y)
        } else {
            let d = x.dim().max(y.dim());
            px = x.padded_to(d)?;
            py = y.padded_to(d)?;
            (&px, &py)
        };
        match self {
            CloudMetric::Hausdorff => hausdorff(x, y),
            CloudMetric::Wasserstein2 => wasserstein2(x, y),
        }
    }
}

/// Distances for every unordered pair `i < j` of `clouds`, in lexicographic
/// pair order. Pairs are evaluated in parallel; the order of the output is
/// fixed.
pub fn pairwise(clouds: &[&PointCloud], metric: CloudMetric) -> Result<Vec<(usize, usize, f64)>> {
    let pairs: Vec<(usize, usize)> = (0..clouds.len())
        .flat_map(|i| ((i + 1)..clouds.len()).map(move |j| (i, j)))
        .collect();
    pairs
        .into_par_iter()
        .map(|(i, j)| Ok((i, j, metric.eval(clouds[i], clouds[j])?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(rows: &[[f64; 2]]) -> PointCloud {
        PointCloud::from_rows(rows).unwrap()
    }

    #[test]
    fn normalization_examples() {
        let x = cloud(&[[0.0, 0.0], [0.0, 2.0]]);
        let y = normalize_diameter(&x).unwrap();
        assert_eq!(y.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert!(y.provenance.normalized);
        assert_eq!(normalize_diameter(&y).unwrap().as_slice(), y.as_slice());
        assert!(normalize_diameter(&cloud(&[[1.0, 1.0], [1.0, 1.0]])).is_err());
        assert!(normalize_diameter(&cloud(&[[1.0, 1.0]])).is_err());
    }

    #[test]
    fn hausdorff_examples() {
        let x = cloud(&[[0.0, 0.0]]);
        let y = cloud(&[[3.0, 4.0]]);
        assert_eq!(hausdorff(&x, &y).unwrap(), 5.0);
        let x = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        let y = cloud(&[[0.0, 0.0], [0.0, 2.0]]);
        assert_eq!(hausdorff(&x, &y).unwrap(), 2.0);
        assert_eq!(hausdorff(&x, &x).unwrap(), 0.0);
        let z = PointCloud::from_rows(&[[0.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(hausdorff(&x, &z), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn wasserstein_examples() {
        let x = cloud(&[[0.0, 0.0], [1.0, 0.0]]);
        let y = cloud(&[[0.0, 1.0], [1.0, 1.0]]);
        assert!((wasserstein2(&x, &y).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let swapped = cloud(&[[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(wasserstein2(&x, &swapped).unwrap(), 0.0);
        let three = cloud(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert!(matches!(wasserstein2(&x, &three), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn padded_metric_matches_explicit_padding() {
        let x = cloud(&[[0.0, 1.0], [2.0, 0.5]]);
        let y = PointCloud::from_rows(&[[0.0, 1.0, 0.3], [1.0, 0.0, -0.2]]).unwrap();
        let px = x.padded_to(3).unwrap();
        assert_eq!(CloudMetric::Wasserstein2.eval(&x, &y).unwrap(), wasserstein2(&px, &y).unwrap());
        assert_eq!(CloudMetric::Hausdorff.eval(&y, &x).unwrap(), hausdorff(&y, &px).unwrap());
    }

    #[test]
    fn pairwise_order() {
        let a = cloud(&[[0.0, 0.0]]);
        let b = cloud(&[[1.0, 0.0]]);
        let c = cloud(&[[3.0, 0.0]]);
        let d = pairwise(&[&a, &b, &c], CloudMetric::Hausdorff).unwrap();
        assert_eq!(d, vec![(0, 1, 1.0), (0, 2, 3.0), (1, 2, 2.0)]);
    }
}
