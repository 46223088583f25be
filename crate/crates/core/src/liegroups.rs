//! SO(d) and SE_{K+1}(d) primitives for d ∈ {2, 3}.
//!
//! Tangent vectors of SE_{K+1}(3) are laid out as `[ω, v_0, v_1, …, v_K]`,
//! with `ω` the rotational part and `v_j` the translation-like part of
//! column `j`. The 2D group uses `[θ, v_0, …, v_K]`.

use nalgebra::{DVector, Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Below this angle exp/log/Jacobians switch to Taylor expansions.
pub const SMALL_ANGLE: f64 = 1e-7;

/// Logarithms are rejected when the rotation angle exceeds `π − NEAR_PI_MARGIN`.
pub const NEAR_PI_MARGIN: f64 = 1e-6;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`]; reads the antisymmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// (1 − cos θ)/θ² without cancellation.
fn one_minus_cos_over_sq(theta: f64) -> f64 {
    let h = (0.5 * theta).sin();
    2.0 * h * h / (theta * theta)
}

pub fn so3_exp(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta = v.norm();
    let k = skew(v);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + k + k * k * 0.5;
    }
    Matrix3::identity() + k * (theta.sin() / theta) + k * k * one_minus_cos_over_sq(theta)
}

pub fn so3_log(r: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let c = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let w = vee(r);
    let s = w.norm();
    let theta = s.atan2(c);
    if theta > std::f64::consts::PI - NEAR_PI_MARGIN {
        return Err(Error::AngleNearPi(theta));
    }
    if theta < SMALL_ANGLE {
        return Ok(w * (1.0 + s * s / 6.0));
    }
    if c >= 0.0 {
        return Ok(w * (theta / s));
    }
    // Past π/2 the antisymmetric part shrinks; recover the axis from the symmetric part.
    let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * c;
    let i = (0..3).max_by(|&a, &b2| b[(a, a)].total_cmp(&b[(b2, b2)])).unwrap();
    let mut axis: Vector3<f64> = b.column(i).into();
    axis.normalize_mut();
    if axis.dot(&w) < 0.0 {
        axis = -axis;
    }
    Ok(axis * theta)
}

/// Left Jacobian of SO(3).
pub fn left_jacobian(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta = v.norm();
    let k = skew(v);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + k * 0.5 + k * k / 6.0;
    }
    let t3 = theta * theta * theta;
    Matrix3::identity() + k * one_minus_cos_over_sq(theta) + k * k * ((theta - theta.sin()) / t3)
}

pub fn left_jacobian_inv(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta = v.norm();
    let k = skew(v);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() - k * 0.5 + k * k / 12.0;
    }
    let coeff = 1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() - k * 0.5 + k * k * coeff
}

pub fn so2_exp(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

pub fn so2_log(r: &Matrix2<f64>) -> Result<f64> {
    let theta = r[(1, 0)].atan2(r[(0, 0)]);
    if theta.abs() > std::f64::consts::PI - NEAR_PI_MARGIN {
        return Err(Error::AngleNearPi(theta));
    }
    Ok(theta)
}

fn so2_left_jacobian(theta: f64) -> Matrix2<f64> {
    if theta.abs() < SMALL_ANGLE {
        return Matrix2::new(1.0, -0.5 * theta, 0.5 * theta, 1.0);
    }
    let a = theta.sin() / theta;
    let b = theta * one_minus_cos_over_sq(theta);
    Matrix2::new(a, -b, b, a)
}

/// Polar projection onto SO(3); used to re-orthonormalise after long products.
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    (r * r.transpose() - Matrix3::identity()).norm() < tol && (r.determinant() - 1.0).abs() < tol
}

/// Element of SE_{K+1}(3): a rotation plus K+1 translation-like columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SeK3 {
    pub rotation: Matrix3<f64>,
    pub columns: Vec<Vector3<f64>>,
}

impl SeK3 {
    pub fn identity(columns: usize) -> Self {
        Self { rotation: Matrix3::identity(), columns: vec![Vector3::zeros(); columns] }
    }

    pub fn tangent_dim(&self) -> usize {
        3 + 3 * self.columns.len()
    }

    pub fn exp(xi: &DVector<f64>) -> Result<Self> {
        if xi.len() < 3 || xi.len() % 3 != 0 {
            return Err(Error::DimensionMismatch(format!("SE_K(3) tangent of length {}", xi.len())));
        }
        let w = Vector3::new(xi[0], xi[1], xi[2]);
        let jl = left_jacobian(&w);
        let columns = (1..xi.len() / 3).map(|j| jl * xi.fixed_rows::<3>(3 * j)).collect();
        Ok(Self { rotation: so3_exp(&w), columns })
    }

    pub fn log(&self) -> Result<DVector<f64>> {
        let w = so3_log(&self.rotation)?;
        let jinv = left_jacobian_inv(&w);
        let mut xi = DVector::zeros(self.tangent_dim());
        xi.fixed_rows_mut::<3>(0).copy_from(&w);
        for (j, t) in self.columns.iter().enumerate() {
            xi.fixed_rows_mut::<3>(3 + 3 * j).copy_from(&(jinv * t));
        }
        Ok(xi)
    }

    pub fn compose(&self, other: &Self) -> Self {
        let columns = self.columns.iter().zip(&other.columns).map(|(a, b)| a + self.rotation * b).collect();
        Self { rotation: self.rotation * other.rotation, columns }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, columns: self.columns.iter().map(|t| -(rt * t)).collect() }
    }
}

/// Element of SE_{K+1}(2).
#[derive(Clone, Debug, PartialEq)]
pub struct SeK2 {
    pub rotation: Matrix2<f64>,
    pub columns: Vec<Vector2<f64>>,
}

impl SeK2 {
    pub fn identity(columns: usize) -> Self {
        Self { rotation: Matrix2::identity(), columns: vec![Vector2::zeros(); columns] }
    }

    pub fn exp(xi: &DVector<f64>) -> Result<Self> {
        if xi.is_empty() || (xi.len() - 1) % 2 != 0 {
            return Err(Error::DimensionMismatch(format!("SE_K(2) tangent of length {}", xi.len())));
        }
        let v = so2_left_jacobian(xi[0]);
        let columns = (0..(xi.len() - 1) / 2).map(|j| v * xi.fixed_rows::<2>(1 + 2 * j)).collect();
        Ok(Self { rotation: so2_exp(xi[0]), columns })
    }

    pub fn log(&self) -> Result<DVector<f64>> {
        let theta = so2_log(&self.rotation)?;
        let vinv = so2_left_jacobian(theta).try_inverse().ok_or(Error::AngleNearPi(theta))?;
        let mut xi = DVector::zeros(1 + 2 * self.columns.len());
        xi[0] = theta;
        for (j, t) in self.columns.iter().enumerate() {
            xi.fixed_rows_mut::<2>(1 + 2 * j).copy_from(&(vinv * t));
        }
        Ok(xi)
    }

    pub fn compose(&self, other: &Self) -> Self {
        let columns = self.columns.iter().zip(&other.columns).map(|(a, b)| a + self.rotation * b).collect();
        Self { rotation: self.rotation * other.rotation, columns }
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, columns: self.columns.iter().map(|t| -(rt * t)).collect() }
    }
}
