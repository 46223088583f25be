//! Planar (d = 2) point SLAM: Jacobians, unobservable subspace and the v1
//! affine map, used only by the observability checkers.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::atlas::Atlas;
use crate::error::{Error, Result};
use crate::liegroups::{so2_exp, so2_log};

/// `[[0, −1], [1, 0]]`, the planar hat of a unit rotation rate.
pub fn hat2() -> Matrix2<f64> {
    Matrix2::new(0.0, -1.0, 1.0, 0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanarState {
    pub rotation: Matrix2<f64>,
    pub position: Vector2<f64>,
    pub landmarks: DVector<f64>,
}

impl PlanarState {
    pub fn dim(&self) -> usize {
        3 + self.landmarks.len()
    }

    pub fn feature_count(&self) -> usize {
        self.landmarks.len() / 2
    }

    pub fn landmark(&self, j: usize) -> Vector2<f64> {
        Vector2::new(self.landmarks[2 * j], self.landmarks[2 * j + 1])
    }

    /// `(R R_u, p + R p_u)`.
    pub fn process(&self, rot: f64, trans: &Vector2<f64>) -> Self {
        Self { rotation: self.rotation * so2_exp(rot), position: self.position + self.rotation * trans, landmarks: self.landmarks.clone() }
    }

    pub fn observe(&self, j: usize) -> Result<Vector2<f64>> {
        if j >= self.feature_count() {
            return Err(Error::IndexOutOfRange { index: j, count: self.feature_count() });
        }
        Ok(self.rotation.transpose() * (self.landmark(j) - self.position))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct PlanarChart;

impl Atlas<PlanarState> for PlanarChart {
    fn error(&self, center: &PlanarState, x: &PlanarState) -> Result<DVector<f64>> {
        if center.landmarks.len() != x.landmarks.len() {
            return Err(Error::DimensionMismatch("landmark counts differ".into()));
        }
        let mut e = DVector::zeros(x.dim());
        e[0] = so2_log(&(x.rotation * center.rotation.transpose()))?;
        e.fixed_rows_mut::<2>(1).copy_from(&(x.position - center.position));
        e.rows_mut(3, x.landmarks.len()).copy_from(&(&x.landmarks - &center.landmarks));
        Ok(e)
    }

    fn retract(&self, center: &PlanarState, eps: &DVector<f64>) -> Result<PlanarState> {
        if eps.len() != center.dim() {
            return Err(Error::DimensionMismatch(format!("error of length {} for a {}-dimensional state", eps.len(), center.dim())));
        }
        Ok(PlanarState {
            rotation: so2_exp(eps[0]) * center.rotation,
            position: center.position + Vector2::new(eps[1], eps[2]),
            landmarks: &center.landmarks + eps.rows(3, center.landmarks.len()),
        })
    }
}

pub fn planar_f(p_prev: &Vector2<f64>, p_pred: &Vector2<f64>, m: usize) -> DMatrix<f64> {
    let mut f = DMatrix::identity(m, m);
    f.fixed_view_mut::<2, 1>(1, 0).copy_from(&(hat2() * (p_pred - p_prev)));
    f
}

/// Noise ordered as (rotation, translation).
pub fn planar_g(r_prev: &Matrix2<f64>, m: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(m, 3);
    g[(0, 0)] = 1.0;
    g.fixed_view_mut::<2, 2>(1, 1).copy_from(r_prev);
    g
}

pub fn planar_h(x: &PlanarState, j: usize) -> Result<DMatrix<f64>> {
    let f = x.landmark(j);
    x.observe(j)?;
    let rt = x.rotation.transpose();
    let mut h = DMatrix::zeros(2, x.dim());
    h.fixed_view_mut::<2, 1>(0, 0).copy_from(&(-(rt * hat2() * (f - x.position))));
    h.fixed_view_mut::<2, 2>(0, 1).copy_from(&(-rt));
    h.fixed_view_mut::<2, 2>(0, 3 + 2 * j).copy_from(&rt);
    Ok(h)
}

pub fn planar_h_stacked(x: &PlanarState) -> Result<DMatrix<f64>> {
    let k = x.feature_count();
    let mut h = DMatrix::zeros(2 * k, x.dim());
    for j in 0..k {
        h.view_mut((2 * j, 0), (2, x.dim())).copy_from(&planar_h(x, j)?);
    }
    Ok(h)
}

/// Two translations and the rotation about the origin.
pub fn planar_nullspace(x: &PlanarState) -> DMatrix<f64> {
    let mut n = DMatrix::zeros(x.dim(), 3);
    n[(0, 2)] = 1.0;
    n.fixed_view_mut::<2, 2>(1, 0).fill_with_identity();
    n.fixed_view_mut::<2, 1>(1, 2).copy_from(&(hat2() * x.position));
    for j in 0..x.feature_count() {
        n.fixed_view_mut::<2, 2>(3 + 2 * j, 0).fill_with_identity();
        n.fixed_view_mut::<2, 1>(3 + 2 * j, 2).copy_from(&(hat2() * x.landmark(j)));
    }
    n
}

/// `[[1, 0, 0], [−J p, I, 0], [−J f_j, 0, I]]`.
pub fn planar_v1(x: &PlanarState) -> DMatrix<f64> {
    let mut a = DMatrix::identity(x.dim(), x.dim());
    a.fixed_view_mut::<2, 1>(1, 0).copy_from(&(-(hat2() * x.position)));
    for j in 0..x.feature_count() {
        a.fixed_view_mut::<2, 1>(3 + 2 * j, 0).copy_from(&(-(hat2() * x.landmark(j))));
    }
    a
}
