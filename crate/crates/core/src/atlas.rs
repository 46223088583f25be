//! Charts, atlases and Jacobians expressed in chart coordinates.
//!
//! An [`Atlas`] assigns to every center state `X̂` an error map `ρ_X̂` and its
//! inverse (the retraction). An [`AffineAtlas`] left-multiplies the error of a
//! base atlas by a state-dependent invertible matrix `A_X̂`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Central finite-difference step used by every numeric Jacobian.
pub const FD_STEP: f64 = 1e-6;

/// Affine matrices with a larger condition number are treated as singular.
pub const MAX_AFFINE_CONDITION: f64 = 1e8;

pub trait Atlas<S>: Send + Sync {
    /// `ρ_center(x)`.
    fn error(&self, center: &S, x: &S) -> Result<DVector<f64>>;

    /// `ρ_center⁻¹(eps)`.
    fn retract(&self, center: &S, eps: &DVector<f64>) -> Result<S>;

    fn dim(&self, center: &S) -> Result<usize> {
        Ok(self.error(center, center)?.len())
    }
}

impl<S, T: Atlas<S> + ?Sized> Atlas<S> for &T {
    fn error(&self, center: &S, x: &S) -> Result<DVector<f64>> {
        (**self).error(center, x)
    }
    fn retract(&self, center: &S, eps: &DVector<f64>) -> Result<S> {
        (**self).retract(center, eps)
    }
}

/// State-dependent invertible matrix `X ↦ A_X`.
pub trait AffineMap<S>: Send + Sync {
    fn matrix(&self, x: &S) -> Result<DMatrix<f64>>;

    fn inverse(&self, x: &S) -> Result<DMatrix<f64>> {
        invert(&self.matrix(x)?)
    }
}

impl<S, T: AffineMap<S> + ?Sized> AffineMap<S> for &T {
    fn matrix(&self, x: &S) -> Result<DMatrix<f64>> {
        (**self).matrix(x)
    }
    fn inverse(&self, x: &S) -> Result<DMatrix<f64>> {
        (**self).inverse(x)
    }
}

/// The same matrix at every state.
#[derive(Clone, Debug)]
pub struct ConstantAffine(pub DMatrix<f64>);

impl<S> AffineMap<S> for ConstantAffine {
    fn matrix(&self, _x: &S) -> Result<DMatrix<f64>> {
        Ok(self.0.clone())
    }
}

/// Wraps a closure as an [`AffineMap`].
pub struct FnAffine<F>(pub F);

impl<S, F> AffineMap<S> for FnAffine<F>
where
    F: Fn(&S) -> DMatrix<f64> + Send + Sync,
{
    fn matrix(&self, x: &S) -> Result<DMatrix<f64>> {
        Ok((self.0)(x))
    }
}

pub fn invert(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().lu().try_inverse().ok_or(Error::SingularAffine(f64::INFINITY))
}

/// Ratio of the extreme singular values (infinite for a singular matrix).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn symmetrize(p: &DMatrix<f64>) -> DMatrix<f64> {
    (p + p.transpose()) * 0.5
}

/// `ψ_X̂ = A_X̂ · φ_X̂`.
#[derive(Clone, Debug)]
pub struct AffineAtlas<B, M> {
    pub base: B,
    pub affine: M,
}

impl<B, M> AffineAtlas<B, M> {
    pub fn new(base: B, affine: M) -> Self {
        Self { base, affine }
    }
}

impl<S, B: Atlas<S>, M: AffineMap<S>> Atlas<S> for AffineAtlas<B, M> {
    fn error(&self, center: &S, x: &S) -> Result<DVector<f64>> {
        Ok(self.affine.matrix(center)? * self.base.error(center, x)?)
    }

    fn retract(&self, center: &S, eps: &DVector<f64>) -> Result<S> {
        let eta = self.affine.inverse(center)? * eps;
        self.base.retract(center, &eta)
    }
}

/// Identity chart on ℝ^m.
#[derive(Clone, Copy, Debug, Default)]
pub struct EuclideanAtlas;

impl Atlas<DVector<f64>> for EuclideanAtlas {
    fn error(&self, center: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        if center.len() != x.len() {
            return Err(Error::DimensionMismatch(format!("{} vs {}", center.len(), x.len())));
        }
        Ok(x - center)
    }

    fn retract(&self, center: &DVector<f64>, eps: &DVector<f64>) -> Result<DVector<f64>> {
        if center.len() != eps.len() {
            return Err(Error::DimensionMismatch(format!("{} vs {}", center.len(), eps.len())));
        }
        Ok(center + eps)
    }
}

/// Process, noise and observation Jacobians of one filter step in one atlas.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianTriple {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

/// Central differences of `f` at the origin of ℝ^n_in.
pub(crate) fn central_difference<F>(n_in: usize, f: F) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut columns = Vec::with_capacity(n_in);
    let mut delta = DVector::zeros(n_in);
    for j in 0..n_in {
        delta[j] = FD_STEP;
        let plus = f(&delta)?;
        delta[j] = -FD_STEP;
        let minus = f(&delta)?;
        delta[j] = 0.0;
        columns.push((plus - minus) / (2.0 * FD_STEP));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    Ok(DMatrix::from_fn(rows, n_in, |i, j| columns[j][i]))
}

/// Finite-difference Jacobians of a process `f(x, w)` (with `w` the
/// control-noise perturbation of dimension `q`) and observation `h(x)`,
/// linearised through the charts of `atlas` centred at `prev` and `pred`.
pub fn numeric_jacobians<S, A, P, H>(
    atlas: &A,
    process: P,
    observe: H,
    prev: &S,
    pred: &S,
    q: usize,
) -> Result<JacobianTriple>
where
    A: Atlas<S> + ?Sized,
    P: Fn(&S, &DVector<f64>) -> Result<S>,
    H: Fn(&S) -> Result<DVector<f64>>,
{
    let m = atlas.dim(pred)?;
    let zero_w = DVector::zeros(q);
    let f = central_difference(m, |e| {
        let x = atlas.retract(prev, e)?;
        atlas.error(pred, &process(&x, &zero_w)?)
    })?;
    let g = central_difference(q, |w| atlas.error(pred, &process(prev, w)?))?;
    let h = central_difference(m, |e| observe(&atlas.retract(pred, e)?))?;
    Ok(JacobianTriple { f, g, h })
}

/// `F^ξ = A_pred F A_prev⁻¹`, `G^ξ = A_pred G`, `H^ξ = H A_pred⁻¹`.
pub fn transform_jacobians(j: &JacobianTriple, a_prev: &DMatrix<f64>, a_pred: &DMatrix<f64>) -> Result<JacobianTriple> {
    let prev_inv = invert(a_prev)?;
    let pred_inv = invert(a_pred)?;
    Ok(transform_jacobians_with_inverses(j, &prev_inv, a_pred, &pred_inv))
}

pub(crate) fn transform_jacobians_with_inverses(
    j: &JacobianTriple,
    a_prev_inv: &DMatrix<f64>,
    a_pred: &DMatrix<f64>,
    a_pred_inv: &DMatrix<f64>,
) -> JacobianTriple {
    JacobianTriple { f: a_pred * &j.f * a_prev_inv, g: a_pred * &j.g, h: &j.h * a_pred_inv }
}

/// `A P Aᵀ`, symmetrized.
pub fn transform_covariance(p: &DMatrix<f64>, a: &DMatrix<f64>) -> DMatrix<f64> {
    symmetrize(&(a * p * a.transpose()))
}

/// Differential of `π_X ∘ φ_X⁻¹` at the origin, by central differences.
pub fn affine_from_chart<S, Pi, Phi>(pi: &Pi, phi: &Phi, x: &S) -> Result<DMatrix<f64>>
where
    Pi: Atlas<S> + ?Sized,
    Phi: Atlas<S> + ?Sized,
{
    let m = phi.dim(x)?;
    let a = central_difference(m, |eta| pi.error(x, &phi.retract(x, eta)?))?;
    let cond = condition_number(&a);
    if !(cond <= MAX_AFFINE_CONDITION) {
        return Err(Error::SingularAffine(cond));
    }
    Ok(a)
}
