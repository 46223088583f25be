//! Right-invariant chart for point SLAM: `π_X̂(X) = log(X X̂⁻¹)` on SE_{K+1}(3).

use nalgebra::{DMatrix, DVector, Matrix3};

use super::model::SlamState;
use crate::atlas::Atlas;
use crate::error::{Error, Result};
use crate::liegroups::{skew, SeK3};

#[derive(Clone, Copy, Debug, Default)]
pub struct RightInvariantChart;

pub fn to_group(x: &SlamState) -> Result<SeK3> {
    if x.landmarks.len() % 3 != 0 {
        return Err(Error::DimensionMismatch(format!("{} landmark entries do not form 3D points", x.landmarks.len())));
    }
    let mut columns = Vec::with_capacity(1 + x.landmarks.len() / 3);
    columns.push(x.position);
    columns.extend((0..x.landmarks.len() / 3).map(|j| x.landmark3(j)));
    Ok(SeK3 { rotation: x.rotation, columns })
}

pub fn from_group(g: &SeK3) -> SlamState {
    let mut landmarks = DVector::zeros(3 * (g.columns.len() - 1));
    for (j, c) in g.columns.iter().skip(1).enumerate() {
        landmarks.fixed_rows_mut::<3>(3 * j).copy_from(c);
    }
    SlamState { rotation: g.rotation, position: g.columns[0], landmarks }
}

impl Atlas<SlamState> for RightInvariantChart {
    fn error(&self, center: &SlamState, x: &SlamState) -> Result<DVector<f64>> {
        if center.landmarks.len() != x.landmarks.len() {
            return Err(Error::DimensionMismatch(format!("{} vs {} landmark entries", center.landmarks.len(), x.landmarks.len())));
        }
        to_group(x)?.compose(&to_group(center)?.inverse()).log()
    }

    fn retract(&self, center: &SlamState, eps: &DVector<f64>) -> Result<SlamState> {
        if eps.len() != center.dim() {
            return Err(Error::DimensionMismatch(format!("error of length {} for a {}-dimensional state", eps.len(), center.dim())));
        }
        Ok(from_group(&SeK3::exp(eps)?.compose(&to_group(center)?)))
    }
}

/// `F = I`, `G = [[R, 0], [p_pred^ R, R], [f_j^ R, 0]]` with `R` the previous rotation.
pub fn ri_process_jacobians(prev: &SlamState, pred: &SlamState) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = pred.dim();
    let r = prev.rotation;
    let mut g = DMatrix::zeros(m, 6);
    g.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    g.fixed_view_mut::<3, 3>(3, 0).copy_from(&(skew(&pred.position) * r));
    g.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
    for j in 0..pred.landmarks.len() / 3 {
        g.fixed_view_mut::<3, 3>(6 + 3 * j, 0).copy_from(&(skew(&pred.landmark3(j)) * r));
    }
    (DMatrix::identity(m, m), g)
}

/// `H_j = R̂ᵀ [0, −I, …, I, …]`.
pub fn ri_observation_jacobian(x: &SlamState, j: usize) -> Result<DMatrix<f64>> {
    let k = x.landmarks.len() / 3;
    if j >= k {
        return Err(Error::IndexOutOfRange { index: j, count: k });
    }
    let rt: Matrix3<f64> = x.rotation.transpose();
    let mut h = DMatrix::zeros(3, x.dim());
    h.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-rt));
    h.fixed_view_mut::<3, 3>(0, 6 + 3 * j).copy_from(&rt);
    Ok(h)
}
