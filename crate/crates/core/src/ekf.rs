//! The generic EKF on a manifold, its affine covariance-correction variant,
//! and covariance augmentation for new landmarks.
//!
//! A [`FilterModel`] bundles a process/observation pair with the atlas its
//! Jacobians are expressed in. [`AffineModel`] lifts a standard-atlas model to
//! an affine atlas by transforming errors, retractions and Jacobians.

use std::marker::PhantomData;

use nalgebra::{DMatrix, DVector};

use crate::atlas::{self, AffineMap, Atlas, JacobianTriple};
use crate::error::{Error, Result};

/// Innovation covariances with a larger condition number are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBelief<S> {
    pub state: S,
    pub cov: DMatrix<f64>,
}

impl<S> GaussianBelief<S> {
    pub fn new(state: S, cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::DimensionMismatch(format!("covariance is {}x{}", cov.nrows(), cov.ncols())));
        }
        Ok(Self { state, cov })
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    /// Symmetric within 1e-10 relative and eigenvalues ≥ −1e-9·trace.
    pub fn is_valid(&self) -> bool {
        let scale = self.cov.norm().max(f64::MIN_POSITIVE);
        if (&self.cov - self.cov.transpose()).norm() > 1e-10 * scale {
            return false;
        }
        if self.cov.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let min = self.cov.clone().symmetric_eigen().eigenvalues.min();
        min >= -1e-9 * self.cov.trace().abs().max(f64::MIN_POSITIVE)
    }
}

/// Odometry and observation noise standard deviations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Odometry rotation (rad).
    pub sigma_w1: f64,
    /// Odometry translation (m).
    pub sigma_w2: f64,
    /// Observation (m).
    pub sigma_v: f64,
}

impl NoiseSpec {
    pub fn new(sigma_w1: f64, sigma_w2: f64, sigma_v: f64) -> Result<Self> {
        for (name, v) in [("sigma_w1", sigma_w1), ("sigma_w2", sigma_w2), ("sigma_v", sigma_v)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config { field: name.into(), message: format!("must be positive, got {v}") });
            }
        }
        Ok(Self { sigma_w1, sigma_w2, sigma_v })
    }

    /// `diag(σ_w1² I₃, σ_w2² I₃)`.
    pub fn control_cov(&self) -> DMatrix<f64> {
        let mut d = DVector::from_element(6, self.sigma_w2 * self.sigma_w2);
        d.rows_mut(0, 3).fill(self.sigma_w1 * self.sigma_w1);
        DMatrix::from_diagonal(&d)
    }

    pub fn observation_cov(&self, p: usize) -> DMatrix<f64> {
        DMatrix::identity(p, p) * (self.sigma_v * self.sigma_v)
    }
}

/// A system together with the atlas its errors and Jacobians live in.
pub trait FilterModel<S> {
    type Control;

    fn error(&self, center: &S, x: &S) -> Result<DVector<f64>>;
    fn retract(&self, center: &S, eps: &DVector<f64>) -> Result<S>;
    fn predict(&self, x: &S, u: &Self::Control) -> Result<S>;
    /// `(F, G)` for the step `prev → pred`.
    fn process_jacobians(&self, prev: &S, pred: &S, u: &Self::Control) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
    fn observe(&self, x: &S, index: usize) -> Result<DVector<f64>>;
    fn observation_jacobian(&self, x: &S, index: usize) -> Result<DMatrix<f64>>;
}

/// `X ← f(X, û)`, `P ← F P Fᵀ + G Σ Gᵀ`.
pub fn propagate<S, M: FilterModel<S> + ?Sized>(
    model: &M,
    belief: &GaussianBelief<S>,
    u: &M::Control,
    sigma: &DMatrix<f64>,
) -> Result<GaussianBelief<S>> {
    let pred = model.predict(&belief.state, u)?;
    let (f, g) = model.process_jacobians(&belief.state, &pred, u)?;
    check_shape("F", &f, belief.dim(), belief.dim())?;
    check_shape("G", &g, belief.dim(), sigma.nrows())?;
    let cov = &f * &belief.cov * f.transpose() + &g * sigma * g.transpose();
    Ok(GaussianBelief { state: pred, cov: atlas::symmetrize(&cov) })
}

/// One measurement update for observation `index` with measured `z`.
pub fn update<S, M: FilterModel<S> + ?Sized>(
    model: &M,
    belief: &GaussianBelief<S>,
    index: usize,
    z: &DVector<f64>,
    omega: &DMatrix<f64>,
) -> Result<GaussianBelief<S>> {
    let h = model.observation_jacobian(&belief.state, index)?;
    check_shape("H", &h, z.len(), belief.dim())?;
    let y = z - model.observe(&belief.state, index)?;
    kalman_correct(model, belief, &h, &y, omega)
}

fn kalman_correct<S, M: FilterModel<S> + ?Sized>(
    model: &M,
    belief: &GaussianBelief<S>,
    h: &DMatrix<f64>,
    y: &DVector<f64>,
    omega: &DMatrix<f64>,
) -> Result<GaussianBelief<S>> {
    let pht = &belief.cov * h.transpose();
    let s = atlas::symmetrize(&(h * &pht + omega));
    let eig = s.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond <= MAX_INNOVATION_CONDITION) {
        return Err(Error::SingularInnovation(cond));
    }
    let s_inv = s.cholesky().ok_or(Error::SingularInnovation(cond))?.inverse();
    let k = &pht * s_inv;
    let state = model.retract(&belief.state, &(&k * y))?;
    let cov = &belief.cov - &k * pht.transpose();
    Ok(GaussianBelief { state, cov: atlas::symmetrize(&cov) })
}

/// Propagation followed by sequential per-observation updates.
pub fn ekf_step<S, M: FilterModel<S> + ?Sized>(
    model: &M,
    belief: &GaussianBelief<S>,
    u: &M::Control,
    observations: &[(usize, DVector<f64>)],
    sigma: &DMatrix<f64>,
    omega: &DMatrix<f64>,
) -> Result<GaussianBelief<S>> {
    let mut b = propagate(model, belief, u, sigma)?;
    for (index, z) in observations {
        b = update(model, &b, *index, z, omega)?;
    }
    Ok(b)
}

/// One step of the standard-atlas filter carrying the corrected covariance
/// `P̃ = A⁻¹ P^ξ A⁻ᵀ`: after each update `P̃ ← L P̃ Lᵀ` with
/// `L = A⁻¹_{X_new} A_{X_old}`.
pub fn alt_affine_step<S, M, A>(
    model: &M,
    affine: &A,
    belief: &GaussianBelief<S>,
    u: &M::Control,
    observations: &[(usize, DVector<f64>)],
    sigma: &DMatrix<f64>,
    omega: &DMatrix<f64>,
) -> Result<GaussianBelief<S>>
where
    M: FilterModel<S> + ?Sized,
    A: AffineMap<S> + ?Sized,
{
    let mut b = propagate(model, belief, u, sigma)?;
    for (index, z) in observations {
        b = alt_affine_update(model, affine, &b, *index, z, omega)?;
    }
    Ok(b)
}

/// The update half of [`alt_affine_step`] for a single observation.
pub fn alt_affine_update<S, M, A>(
    model: &M,
    affine: &A,
    belief: &GaussianBelief<S>,
    index: usize,
    z: &DVector<f64>,
    omega: &DMatrix<f64>,
) -> Result<GaussianBelief<S>>
where
    M: FilterModel<S> + ?Sized,
    A: AffineMap<S> + ?Sized,
{
    let a_old = affine.matrix(&belief.state)?;
    let next = update(model, belief, index, z, omega)?;
    let l = affine.inverse(&next.state)? * a_old;
    let cov = atlas::transform_covariance(&next.cov, &l);
    Ok(GaussianBelief { state: next.state, cov })
}

/// Appends `r` new error coordinates whose first-order model is
/// `δnew = J_x δ + J_v v`, with `v ~ N(0, Ω)`.
pub fn augment<S>(
    belief: &GaussianBelief<S>,
    new_state: S,
    jac_state: &DMatrix<f64>,
    jac_noise: &DMatrix<f64>,
    omega: &DMatrix<f64>,
) -> Result<GaussianBelief<S>> {
    let m = belief.dim();
    let r = jac_state.nrows();
    check_shape("J_x", jac_state, r, m)?;
    check_shape("J_v", jac_noise, r, omega.nrows())?;
    let cross = jac_state * &belief.cov;
    let corner = &cross * jac_state.transpose() + jac_noise * omega * jac_noise.transpose();
    let mut cov = DMatrix::zeros(m + r, m + r);
    cov.view_mut((0, 0), (m, m)).copy_from(&belief.cov);
    cov.view_mut((m, 0), (r, m)).copy_from(&cross);
    cov.view_mut((0, m), (m, r)).copy_from(&cross.transpose());
    cov.view_mut((m, m), (r, r)).copy_from(&corner);
    Ok(GaussianBelief { state: new_state, cov: atlas::symmetrize(&cov) })
}

fn check_shape(name: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// A standard-atlas model re-expressed in the affine atlas `A_X · φ_X`.
pub struct AffineModel<M, A> {
    pub base: M,
    pub affine: A,
}

impl<M, A> AffineModel<M, A> {
    pub fn new(base: M, affine: A) -> Self {
        Self { base, affine }
    }
}

impl<S, M: FilterModel<S>, A: AffineMap<S>> FilterModel<S> for AffineModel<M, A> {
    type Control = M::Control;

    fn error(&self, center: &S, x: &S) -> Result<DVector<f64>> {
        Ok(self.affine.matrix(center)? * self.base.error(center, x)?)
    }

    fn retract(&self, center: &S, eps: &DVector<f64>) -> Result<S> {
        self.base.retract(center, &(self.affine.inverse(center)? * eps))
    }

    fn predict(&self, x: &S, u: &Self::Control) -> Result<S> {
        self.base.predict(x, u)
    }

    fn process_jacobians(&self, prev: &S, pred: &S, u: &Self::Control) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (f, g) = self.base.process_jacobians(prev, pred, u)?;
        let a_pred = self.affine.matrix(pred)?;
        let prev_inv = self.affine.inverse(prev)?;
        let fx = &a_pred * f * prev_inv;
        Ok((fx, a_pred * g))
    }

    fn observe(&self, x: &S, index: usize) -> Result<DVector<f64>> {
        self.base.observe(x, index)
    }

    fn observation_jacobian(&self, x: &S, index: usize) -> Result<DMatrix<f64>> {
        Ok(self.base.observation_jacobian(x, index)? * self.affine.inverse(x)?)
    }
}

/// A model whose Jacobians come from central finite differences in `atlas`.
///
/// `process(x, u, w)` applies control `u` perturbed by noise `w` (length `q`).
pub struct NumericModel<S, C, At, P, H> {
    pub atlas: At,
    pub process: P,
    pub observe: H,
    pub q: usize,
    _marker: PhantomData<fn(&S, &C)>,
}

impl<S, C, At, P, H> NumericModel<S, C, At, P, H> {
    pub fn new(atlas: At, process: P, observe: H, q: usize) -> Self {
        Self { atlas, process, observe, q, _marker: PhantomData }
    }
}

impl<S, C, At, P, H> FilterModel<S> for NumericModel<S, C, At, P, H>
where
    At: Atlas<S>,
    P: Fn(&S, &C, &DVector<f64>) -> Result<S>,
    H: Fn(&S, usize) -> Result<DVector<f64>>,
{
    type Control = C;

    fn error(&self, center: &S, x: &S) -> Result<DVector<f64>> {
        self.atlas.error(center, x)
    }

    fn retract(&self, center: &S, eps: &DVector<f64>) -> Result<S> {
        self.atlas.retract(center, eps)
    }

    fn predict(&self, x: &S, u: &C) -> Result<S> {
        (self.process)(x, u, &DVector::zeros(self.q))
    }

    fn process_jacobians(&self, prev: &S, pred: &S, u: &C) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let j: JacobianTriple = atlas::numeric_jacobians(
            &self.atlas,
            |x: &S, w: &DVector<f64>| (self.process)(x, u, w),
            |_: &S| Ok(DVector::zeros(0)),
            prev,
            pred,
            self.q,
        )?;
        Ok((j.f, j.g))
    }

    fn observe(&self, x: &S, index: usize) -> Result<DVector<f64>> {
        (self.observe)(x, index)
    }

    fn observation_jacobian(&self, x: &S, index: usize) -> Result<DMatrix<f64>> {
        let m = self.atlas.dim(x)?;
        atlas::central_difference(m, |e| (self.observe)(&self.atlas.retract(x, e)?, index))
    }
}
