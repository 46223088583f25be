//! Observability matrices, nullspaces and the numeric consistency checkers.
//!
//! All checks are sampling based: a subspace is "constant" when the bases
//! computed at every sample agree to within a principal-angle tolerance, and
//! every failing check reports the sample indices that disagree.

use nalgebra::{DMatrix, DVector};

use crate::atlas;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};

/// Singular values below `RANK_TOL · σ_max` count as zero.
pub const RANK_TOL: f64 = 1e-8;
/// Largest principal angle (rad) at which two subspaces are considered equal.
pub const ANGLE_TOL: f64 = 1e-6;
/// Relative projection residual accepted by subset tests.
pub const SUBSET_TOL: f64 = 1e-8;
pub const DEFAULT_ORDER: usize = 3;

/// Orthonormal basis of a subspace of ℝ^ambient.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    basis: DMatrix<f64>,
    tol: f64,
}

impl SubspaceBasis {
    /// Orthonormal basis of the column span of `m`.
    pub fn from_columns(m: &DMatrix<f64>, tol: f64) -> Self {
        let ambient = m.nrows();
        if m.ncols() == 0 || ambient == 0 {
            return Self { basis: DMatrix::zeros(ambient, 0), tol };
        }
        let svd = m.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let smax = svd.singular_values.max();
        let keep: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&i| smax > 0.0 && svd.singular_values[i] > tol * smax).collect();
        Self { basis: u.select_columns(&keep), tol }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Span of `A · basis`.
    pub fn transformed(&self, a: &DMatrix<f64>) -> Self {
        Self::from_columns(&(a * &self.basis), self.tol)
    }

    /// Relative distance of `v` from the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> f64 {
        let r = v - &self.basis * (self.basis.transpose() * v);
        r.norm() / v.norm().max(f64::MIN_POSITIVE)
    }
}

/// `[H₀, …, H_k]` and `[F₀, …, F_{k−1}]`, with `F_i` mapping step `i` to `i+1`.
#[derive(Clone, Debug)]
pub struct ObservabilitySequence {
    pub h: Vec<DMatrix<f64>>,
    pub f: Vec<DMatrix<f64>>,
}

impl ObservabilitySequence {
    pub fn new(h: Vec<DMatrix<f64>>, f: Vec<DMatrix<f64>>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::DimensionMismatch("empty observability sequence".into()));
        }
        if f.len() + 1 != h.len() {
            return Err(Error::DimensionMismatch(format!("{} H blocks need {} F blocks, got {}", h.len(), h.len() - 1, f.len())));
        }
        let m = h[0].ncols();
        if let Some(bad) = h.iter().find(|hi| hi.ncols() != m) {
            return Err(Error::DimensionMismatch(format!("H with {} columns in a {m}-dimensional sequence", bad.ncols())));
        }
        if let Some(bad) = f.iter().find(|fi| fi.nrows() != m || fi.ncols() != m) {
            return Err(Error::DimensionMismatch(format!("F is {}x{}, expected {m}x{m}", bad.nrows(), bad.ncols())));
        }
        Ok(Self { h, f })
    }

    pub fn state_dim(&self) -> usize {
        self.h[0].ncols()
    }

    pub fn order(&self) -> usize {
        self.h.len() - 1
    }

    /// The first `k + 1` observation blocks.
    pub fn truncated(&self, k: usize) -> Self {
        let n = (k + 1).min(self.h.len());
        Self { h: self.h[..n].to_vec(), f: self.f[..n - 1].to_vec() }
    }
}

/// Stacks `[H₀; H₁F₀; …; H_k F_{k−1}⋯F₀]`.
pub fn observability_matrix(seq: &ObservabilitySequence) -> Result<DMatrix<f64>> {
    let m = seq.state_dim();
    let rows: usize = seq.h.iter().map(|h| h.nrows()).sum();
    let mut out = DMatrix::zeros(rows, m);
    let mut phi = DMatrix::identity(m, m);
    let mut r = 0;
    for (i, h) in seq.h.iter().enumerate() {
        out.view_mut((r, 0), (h.nrows(), m)).copy_from(&(h * &phi));
        r += h.nrows();
        if i < seq.f.len() {
            phi = &seq.f[i] * phi;
        }
    }
    Ok(out)
}

/// Orthonormal basis of the right nullspace of `m`.
pub fn nullspace_basis(m: &DMatrix<f64>, tol: f64) -> SubspaceBasis {
    let cols = m.ncols();
    if m.nrows() == 0 {
        return SubspaceBasis { basis: DMatrix::identity(cols, cols), tol };
    }
    // Pad to at least square so the SVD yields a full set of right singular vectors.
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.max();
    let null: Vec<usize> =
        (0..svd.singular_values.len()).filter(|&i| smax == 0.0 || svd.singular_values[i] <= tol * smax).collect();
    let basis = DMatrix::from_fn(cols, null.len(), |r, c| v_t[(null[c], r)]);
    SubspaceBasis { basis, tol }
}

pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    m.ncols() - nullspace_basis(m, tol).dim()
}

/// Sine of the largest principal angle between two equal-dimension subspaces.
fn max_angle_sine(a: &SubspaceBasis, b: &SubspaceBasis) -> f64 {
    let qa = a.matrix();
    let qb = b.matrix();
    let residual = qb - qa * (qa.transpose() * qb);
    residual.singular_values().max()
}

pub fn subspace_equal(a: &SubspaceBasis, b: &SubspaceBasis, tol_angle: f64) -> bool {
    if a.ambient() != b.ambient() || a.dim() != b.dim() {
        return false;
    }
    if a.dim() == 0 {
        return true;
    }
    max_angle_sine(a, b).min(1.0).asin() < tol_angle
}

/// `span(sub) ⊂ span(sup)` by relative projection residual.
pub fn subspace_contained(sub: &SubspaceBasis, sup: &SubspaceBasis, tol: f64) -> bool {
    if sub.ambient() != sup.ambient() {
        return false;
    }
    if sub.dim() == 0 {
        return true;
    }
    max_angle_sine(sup, sub) < tol
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintReport {
    /// Nullspace dimension of the true system for orders `0..=k`.
    pub dim_true: Vec<usize>,
    /// Nullspace dimension of the filter's linearised system for orders `0..=k`.
    pub dim_ekf: Vec<usize>,
    pub satisfied: bool,
}

/// Compares unobservable dimensions of the true and filter systems up to order `k`.
pub fn check_observability_constraint(
    truth: &ObservabilitySequence,
    ekf: &ObservabilitySequence,
    k: usize,
    tol: f64,
) -> Result<ConstraintReport> {
    if truth.state_dim() != ekf.state_dim() {
        return Err(Error::DimensionMismatch(format!("state dims {} vs {}", truth.state_dim(), ekf.state_dim())));
    }
    let k = k.min(truth.order()).min(ekf.order());
    let dims = |seq: &ObservabilitySequence| -> Result<Vec<usize>> {
        (0..=k).map(|i| Ok(nullspace_basis(&observability_matrix(&seq.truncated(i))?, tol).dim())).collect()
    };
    let dim_true = dims(truth)?;
    let dim_ekf = dims(ekf)?;
    let satisfied = dim_true == dim_ekf;
    Ok(ConstraintReport { dim_true, dim_ekf, satisfied })
}

/// Outcome of a sampled check, with the disagreeing sample indices on failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionReport {
    pub holds: bool,
    pub witness: Option<(usize, usize)>,
}

impl ConditionReport {
    fn pass() -> Self {
        Self { holds: true, witness: None }
    }
    fn fail(a: usize, b: usize) -> Self {
        Self { holds: false, witness: Some((a, b)) }
    }
}

/// `null(H(X))` is the same subspace at every sample.
pub fn check_condition_i<S, H>(h_at: H, samples: &[S]) -> ConditionReport
where
    S: Sync,
    H: Fn(&S) -> DMatrix<f64> + Sync + Send,
{
    let bases = exec::map_slice(samples, Execution::default(), |s| nullspace_basis(&h_at(s), RANK_TOL));
    match first_disagreement(&bases) {
        None => ConditionReport::pass(),
        Some(j) => ConditionReport::fail(0, j),
    }
}

/// `null(H(X₁) F(X₁, X₀)) ⊂ null(H(X₀))` for every sampled pair `(X₁, X₀)`.
pub fn check_condition_ii<S, H, F>(h_at: H, f_between: F, pairs: &[(S, S)]) -> ConditionReport
where
    S: Sync,
    H: Fn(&S) -> DMatrix<f64> + Sync + Send,
    F: Fn(&S, &S) -> DMatrix<f64> + Sync + Send,
{
    let ok = exec::map_slice(pairs, Execution::default(), |(x1, x0)| {
        let lhs = nullspace_basis(&(h_at(x1) * f_between(x1, x0)), RANK_TOL);
        let h0 = h_at(x0);
        let scale = h0.norm().max(f64::MIN_POSITIVE);
        lhs.dim() == 0 || (&h0 * lhs.matrix()).norm() < SUBSET_TOL * scale
    });
    match ok.iter().position(|&b| !b) {
        None => ConditionReport::pass(),
        Some(i) => ConditionReport::fail(i, i),
    }
}

fn first_disagreement(bases: &[SubspaceBasis]) -> Option<usize> {
    let first = bases.first()?;
    bases.iter().skip(1).position(|b| !subspace_equal(first, b, ANGLE_TOL)).map(|i| i + 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstancyReport {
    pub constant: bool,
    /// The common subspace when `constant`.
    pub basis: Option<SubspaceBasis>,
    pub dims: Vec<usize>,
    pub witness: Option<(usize, usize)>,
}

/// Whether a family of subspaces is one constant subspace.
pub fn constant_subspace(bases: &[SubspaceBasis]) -> ConstancyReport {
    let dims = bases.iter().map(SubspaceBasis::dim).collect();
    match first_disagreement(bases) {
        None => ConstancyReport { constant: true, basis: bases.first().cloned(), dims, witness: None },
        Some(j) => ConstancyReport { constant: false, basis: None, dims, witness: Some((0, j)) },
    }
}

/// Nullspace of the order-`k` observability matrix at each sampled sequence,
/// tested for constancy.
pub fn check_constant_nullspace(samples: &[ObservabilitySequence], k: usize) -> Result<ConstancyReport> {
    let bases: Result<Vec<SubspaceBasis>> = exec::map_slice(samples, Execution::default(), |seq| {
        Ok(nullspace_basis(&observability_matrix(&seq.truncated(k))?, RANK_TOL))
    })
    .into_iter()
    .collect();
    Ok(constant_subspace(&bases?))
}

/// `span(A_X · N(X))` is one constant subspace across the samples.
pub fn verify_affine_candidate<S, A, N>(a_at: A, n_at: N, samples: &[S]) -> Result<ConstancyReport>
where
    S: Sync,
    A: Fn(&S) -> Result<DMatrix<f64>> + Sync + Send,
    N: Fn(&S) -> Result<DMatrix<f64>> + Sync + Send,
{
    let bases: Result<Vec<SubspaceBasis>> = exec::map_slice(samples, Execution::default(), |s| {
        let a = a_at(s)?;
        let cond = atlas::condition_number(&a);
        if !(cond <= atlas::MAX_AFFINE_CONDITION) {
            return Err(Error::SingularAffine(cond));
        }
        Ok(SubspaceBasis::from_columns(&(a * n_at(s)?), RANK_TOL))
    })
    .into_iter()
    .collect();
    Ok(constant_subspace(&bases?))
}

/// `span(F · N̄) = span(N̄)`.
pub fn preserves_subspace(f: &DMatrix<f64>, n: &SubspaceBasis) -> bool {
    subspace_equal(&n.transformed(f), n, ANGLE_TOL)
}

/// Observability matrices of the same trajectory in two atlases have equal rank.
pub fn check_lemma_rank(eta: &ObservabilitySequence, xi: &ObservabilitySequence, k: usize, tol: f64) -> Result<bool> {
    if eta.state_dim() != xi.state_dim() {
        return Ok(false);
    }
    let o_eta = observability_matrix(&eta.truncated(k))?;
    let o_xi = observability_matrix(&xi.truncated(k))?;
    Ok(nullspace_basis(&o_eta, tol).dim() == nullspace_basis(&o_xi, tol).dim())
}

/// `N^ξ = A_{X₀} N^η`.
pub fn check_lemma_affine_nullspace(a: &DMatrix<f64>, n_eta: &SubspaceBasis, n_xi: &SubspaceBasis) -> bool {
    subspace_equal(&n_eta.transformed(a), n_xi, ANGLE_TOL)
}

/// Elementary block row operation.
#[derive(Clone, Debug, PartialEq)]
pub enum BlockRowOp {
    Swap(usize, usize),
    /// Left-multiply block row `i` by an invertible block.
    Scale(usize, DMatrix<f64>),
    /// Block row `target` += `multiplier` · block row `source`.
    Add { target: usize, source: usize, multiplier: DMatrix<f64> },
}

/// Product `E_n ⋯ E_1` of the elementary matrices of `ops`, applied in order.
pub fn compose_row_ops(ops: &[BlockRowOp], block_dims: &[usize]) -> Result<DMatrix<f64>> {
    let offsets: Vec<usize> = block_dims
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let m: usize = block_dims.iter().sum();
    let check = |i: usize| {
        if i >= block_dims.len() {
            Err(Error::DimensionMismatch(format!("block {i} out of {}", block_dims.len())))
        } else {
            Ok(())
        }
    };
    let mut a = DMatrix::identity(m, m);
    for op in ops {
        let mut e = DMatrix::identity(m, m);
        match op {
            BlockRowOp::Swap(i, j) => {
                check(*i)?;
                check(*j)?;
                if block_dims[*i] != block_dims[*j] {
                    return Err(Error::DimensionMismatch(format!("swap of blocks with sizes {} and {}", block_dims[*i], block_dims[*j])));
                }
                let d = block_dims[*i];
                e.view_mut((offsets[*i], offsets[*i]), (d, d)).fill(0.0);
                e.view_mut((offsets[*j], offsets[*j]), (d, d)).fill(0.0);
                e.view_mut((offsets[*i], offsets[*j]), (d, d)).fill_with_identity();
                e.view_mut((offsets[*j], offsets[*i]), (d, d)).fill_with_identity();
            }
            BlockRowOp::Scale(i, s) => {
                check(*i)?;
                let d = block_dims[*i];
                if s.nrows() != d || s.ncols() != d {
                    return Err(Error::DimensionMismatch(format!("scale block {}x{} for block of size {d}", s.nrows(), s.ncols())));
                }
                let cond = atlas::condition_number(s);
                if !(cond <= atlas::MAX_AFFINE_CONDITION) {
                    return Err(Error::SingularAffine(cond));
                }
                e.view_mut((offsets[*i], offsets[*i]), (d, d)).copy_from(s);
            }
            BlockRowOp::Add { target, source, multiplier } => {
                check(*target)?;
                check(*source)?;
                if target == source {
                    return Err(Error::DimensionMismatch("row addition onto itself".into()));
                }
                let (dt, ds) = (block_dims[*target], block_dims[*source]);
                if multiplier.nrows() != dt || multiplier.ncols() != ds {
                    return Err(Error::DimensionMismatch(format!(
                        "multiplier {}x{} for blocks {dt}x{ds}",
                        multiplier.nrows(),
                        multiplier.ncols()
                    )));
                }
                e.view_mut((offsets[*target], offsets[*source]), (dt, ds)).copy_from(multiplier);
            }
        }
        a = e * a;
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn basis(cols: &[&[f64]]) -> SubspaceBasis {
        let m = DMatrix::from_fn(cols[0].len(), cols.len(), |r, c| cols[c][r]);
        SubspaceBasis::from_columns(&m, RANK_TOL)
    }

    #[test]
    fn nullspace_dimensions() {
        assert_eq!(nullspace_basis(&DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]), RANK_TOL).dim(), 2);
        assert_eq!(nullspace_basis(&DMatrix::zeros(3, 5), RANK_TOL).dim(), 5);
        assert_eq!(nullspace_basis(&DMatrix::identity(4, 4), RANK_TOL).dim(), 0);
        assert_eq!(nullspace_basis(&DMatrix::zeros(0, 3), RANK_TOL).dim(), 3);
    }

    #[test]
    fn nullspace_of_constructed_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let m = rng.random_range(2..12);
            let r = rng.random_range(0..=m);
            let a = DMatrix::from_fn(m, r, |_, _| rng.random_range(-1.0..1.0));
            let b = DMatrix::from_fn(r, m, |_, _| rng.random_range(-1.0..1.0));
            let n = nullspace_basis(&(&a * &b), RANK_TOL);
            assert_eq!(n.dim(), m - r);
            assert!((&a * &b * n.matrix()).norm() < 1e-10);
        }
    }

    #[test]
    fn subspace_equality() {
        let e1 = basis(&[&[1.0, 0.0, 0.0]]);
        let two_e1 = basis(&[&[2.0, 0.0, 0.0]]);
        let e2 = basis(&[&[0.0, 1.0, 0.0]]);
        assert!(subspace_equal(&e1, &e1, ANGLE_TOL));
        assert!(subspace_equal(&e1, &two_e1, ANGLE_TOL));
        assert!(!subspace_equal(&e1, &e2, ANGLE_TOL));
        let plane = basis(&[&[1.0, 1.0, 0.0], &[1.0, -1.0, 0.0]]);
        let plane2 = basis(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert!(subspace_equal(&plane, &plane2, ANGLE_TOL));
        assert!(subspace_contained(&e1, &plane, 1e-12));
        assert!(!subspace_contained(&plane, &e1, 1e-12));
    }

    #[test]
    fn observability_matrix_stacking() {
        let h0 = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let h1 = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let seq = ObservabilitySequence::new(vec![h0.clone()], vec![]).unwrap();
        assert_eq!(observability_matrix(&seq).unwrap(), h0);
        let seq = ObservabilitySequence::new(vec![h0.clone(), h1.clone()], vec![DMatrix::identity(2, 2)]).unwrap();
        assert_eq!(observability_matrix(&seq).unwrap(), DMatrix::identity(2, 2));
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let seq = ObservabilitySequence::new(vec![h0.clone(), h0.clone(), h0.clone()], vec![f.clone(), f.clone()]).unwrap();
        let o = observability_matrix(&seq).unwrap();
        assert_eq!(o.row(2).clone_owned(), (&h0 * &f * &f).row(0).clone_owned());
        assert!(ObservabilitySequence::new(vec![h0.clone(), h1], vec![]).is_err());
        assert!(ObservabilitySequence::new(vec![], vec![]).is_err());
    }

    #[test]
    fn condition_i_examples() {
        let constant = check_condition_i(|_: &f64| DMatrix::from_row_slice(1, 2, &[1.0, 2.0]), &[0.0, 1.0, 2.0]);
        assert!(constant.holds);
        let r = check_condition_i(|x: &f64| DMatrix::from_row_slice(1, 2, &[*x, 1.0]), &[0.0, 1.0]);
        assert_eq!(r, ConditionReport { holds: false, witness: Some((0, 1)) });
    }

    #[test]
    fn condition_ii_examples() {
        let h = |_: &f64| DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(check_condition_ii(h, |_: &f64, _: &f64| DMatrix::identity(2, 2), &[(0.0, 1.0)]).holds);
        let r = check_condition_ii(h, |_: &f64, _: &f64| DMatrix::zeros(2, 2), &[(0.0, 1.0)]);
        assert!(!r.holds);
        assert_eq!(r.witness, Some((0, 0)));
    }

    #[test]
    fn constraint_identical_sequences() {
        let h = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let f = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let seq = ObservabilitySequence::new(vec![h.clone(), h.clone(), h], vec![f.clone(), f]).unwrap();
        let r = check_observability_constraint(&seq, &seq, 2, RANK_TOL).unwrap();
        assert!(r.satisfied);
        assert_eq!(r.dim_true, vec![2, 1, 1]);
    }

    #[test]
    fn constant_nullspace_single_sample_is_vacuous() {
        let h = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let seq = ObservabilitySequence::new(vec![h], vec![]).unwrap();
        let r = check_constant_nullspace(&[seq], 0).unwrap();
        assert!(r.constant);
        assert_eq!(r.basis.unwrap().dim(), 1);
    }

    #[test]
    fn row_op_composition() {
        assert_eq!(compose_row_ops(&[], &[3, 3]).unwrap(), DMatrix::identity(6, 6));
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..20 {
            let ops: Vec<BlockRowOp> = (0..4)
                .map(|_| {
                    let t = rng.random_range(0..3);
                    let s = (t + rng.random_range(1..3)) % 3;
                    BlockRowOp::Add { target: t, source: s, multiplier: DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0)) }
                })
                .collect();
            let a = compose_row_ops(&ops, &[2, 2, 2]).unwrap();
            assert!((a.determinant() - 1.0).abs() < 1e-9);
        }
        let swap = compose_row_ops(&[BlockRowOp::Swap(0, 1)], &[1, 1]).unwrap();
        assert_eq!(swap, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let order = compose_row_ops(
            &[
                BlockRowOp::Scale(0, DMatrix::from_element(1, 1, 2.0)),
                BlockRowOp::Add { target: 1, source: 0, multiplier: DMatrix::from_element(1, 1, 1.0) },
            ],
            &[1, 1],
        )
        .unwrap();
        assert_eq!(order, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 1.0]));
        assert!(compose_row_ops(&[BlockRowOp::Swap(0, 2)], &[1, 1]).is_err());
        assert!(compose_row_ops(&[BlockRowOp::Scale(0, DMatrix::zeros(1, 1))], &[1, 1]).is_err());
    }

    #[test]
    fn lemma_checks_on_linear_example() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let m = 4;
        let h: Vec<DMatrix<f64>> = (0..3).map(|_| DMatrix::from_fn(1, m, |_, _| rng.random_range(-1.0..1.0))).collect();
        let f: Vec<DMatrix<f64>> = (0..2).map(|_| DMatrix::identity(m, m)).collect();
        let eta = ObservabilitySequence::new(h.clone(), f.clone()).unwrap();
        let a = DMatrix::from_fn(m, m, |i, j| if i == j { 2.0 } else { rng.random_range(-0.5..0.5) });
        let ai = a.clone().try_inverse().unwrap();
        let xi = ObservabilitySequence::new(h.iter().map(|hi| hi * &ai).collect(), f.iter().map(|fi| &a * fi * &ai).collect()).unwrap();
        assert!(check_lemma_rank(&eta, &xi, 2, RANK_TOL).unwrap());
        let n_eta = nullspace_basis(&observability_matrix(&eta).unwrap(), RANK_TOL);
        let n_xi = nullspace_basis(&observability_matrix(&xi).unwrap(), RANK_TOL);
        assert_eq!(n_eta.dim(), 1);
        assert!(check_lemma_affine_nullspace(&a, &n_eta, &n_xi));
        assert!(check_lemma_affine_nullspace(&DMatrix::identity(m, m), &n_eta, &n_eta));
    }
}
