//! Training targets over the candidate grid and the mean-absolute-error
//! loss with its gradient.

use ndarray::Array2;
use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tdoa_2d, CandidateGrid, Point3};
use crate::likelihood::LikelihoodGrid;

/// Decay widths of the two target shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// Gaussian decay radius in metres.
    pub sigma_gaussian: f64,
    /// Hyperbolic decay width in seconds of TDOA difference.
    pub sigma_hyperbolic: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        TargetConfig {
            sigma_gaussian: 0.5,
            sigma_hyperbolic: 1.25e-4,
        }
    }
}

/// Scene-level target: exp(-(|p - p_s| / sigma)^2) over cell centres, with
/// the planar source position compared at the grid height. The source cell
/// scores exactly 1 when the source sits on a cell centre.
pub fn gaussian_grid(p_s: [f64; 2], grid: &CandidateGrid, sigma: f64) -> LikelihoodGrid {
    assert!(sigma > 0.0, "sigma must be positive");
    let side = grid.side;
    let mut values = Array2::zeros((side, side));
    for iy in 0..side {
        for ix in 0..side {
            let p = grid.point(ix, iy);
            let dx = p[0] - p_s[0];
            let dy = p[1] - p_s[1];
            let r = (dx * dx + dy * dy).sqrt() / sigma;
            values[(iy, ix)] = (-(r * r)).exp();
        }
    }
    LikelihoodGrid {
        values,
        grid: grid.clone(),
    }
}

/// Pairwise target: exp(-((tau_ij(p) - tau_ij(p_s)) / sigma)^2), a ridge of
/// ones along the hyperbola of cells sharing the source's TDOA for this
/// microphone pair. Depends on |delta tau| only, so equal-offset cells get
/// identical values.
pub fn hyperbolic_grid(
    p_s: [f64; 2],
    p_i: Point3,
    p_j: Point3,
    grid: &CandidateGrid,
    sigma: f64,
) -> LikelihoodGrid {
    assert!(sigma > 0.0, "sigma must be positive");
    let tau_s = tdoa_2d(p_i, p_j, p_s, grid.z_plane);
    let side = grid.side;
    let mut values = Array2::zeros((side, side));
    for iy in 0..side {
        for ix in 0..side {
            let p = grid.point(ix, iy);
            let dt = (tdoa_2d(p_i, p_j, [p[0], p[1]], grid.z_plane) - tau_s) / sigma;
            values[(iy, ix)] = (-(dt * dt)).exp();
        }
    }
    LikelihoodGrid {
        values,
        grid: grid.clone(),
    }
}

/// Mean absolute error over flat slices plus the subgradient with respect
/// to the prediction: sign(pred - target) / n per element, zero exactly at
/// the kink.
pub fn mae_flat<F>(pred: &[F], target: &[F]) -> (F, Vec<F>)
where
    F: Float + FromPrimitive,
{
    assert_eq!(pred.len(), target.len());
    let n = F::from_usize(pred.len()).expect("length fits in F");
    let mut loss = F::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let d = p - t;
        loss = loss + d.abs();
        let g = if d > F::zero() {
            F::one()
        } else if d < F::zero() {
            -F::one()
        } else {
            F::zero()
        };
        grad.push(g / n);
    }
    (loss / n, grad)
}

/// MAE between two grids of equal shape; the gradient is laid out like the
/// grid values.
pub fn mae_loss(pred: &LikelihoodGrid, target: &LikelihoodGrid) -> Result<(f64, Array2<f64>)> {
    if pred.values.dim() != target.values.dim() {
        return Err(Error::GridShapeMismatch {
            left: pred.values.dim().0,
            right: target.values.dim().0,
        });
    }
    let p: Vec<f64> = pred.values.iter().cloned().collect();
    let t: Vec<f64> = target.values.iter().cloned().collect();
    let (loss, grad) = mae_flat(&p, &t);
    let grad = Array2::from_shape_vec(pred.values.dim(), grad).expect("same length");
    Ok((loss, grad))
}
