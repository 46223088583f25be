//! NEES and RMSE.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `εᵀ P⁻¹ ε / dim`.
pub fn nees(eps: &DVector<f64>, p: &DMatrix<f64>, dim: usize) -> Result<f64> {
    if p.nrows() != eps.len() || p.ncols() != eps.len() || dim == 0 {
        return Err(Error::DimensionMismatch(format!("{}-vector against a {}x{} covariance", eps.len(), p.nrows(), p.ncols())));
    }
    let chol = p.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let v = chol.l().solve_lower_triangular(eps).ok_or(Error::SingularCovariance)?;
    Ok(v.norm_squared() / dim as f64)
}

/// NEES of the block `[offset, offset + len)` of an error and covariance.
pub fn block_nees(eps: &DVector<f64>, p: &DMatrix<f64>, offset: usize, len: usize) -> Result<f64> {
    if offset + len > eps.len() {
        return Err(Error::IndexOutOfRange { index: offset + len, count: eps.len() });
    }
    nees(&eps.rows(offset, len).into_owned(), &p.view((offset, offset), (len, len)).into_owned(), len)
}

/// Per-step RMSE over runs (`errors[run][step]`) and its mean over steps.
pub fn rmse_series(errors: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let Some(first) = errors.first() else { return (Vec::new(), 0.0) };
    let steps = first.len();
    let series: Vec<f64> = (0..steps)
        .map(|i| (errors.iter().map(|run| run[i] * run[i]).sum::<f64>() / errors.len() as f64).sqrt())
        .collect();
    let avg = mean(&series);
    (series, avg)
}

/// Mean of the finite entries; NaN when there are none.
pub fn mean(v: &[f64]) -> f64 {
    let (sum, n) = v.iter().filter(|x| x.is_finite()).fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn nees_by_hand() {
        let p = DMatrix::identity(3, 3);
        assert_eq!(nees(&DVector::zeros(3), &p, 3).unwrap(), 0.0);
        let e = DVector::from_vec(vec![1.0, -1.0, 1.0]);
        assert!((nees(&e, &p, 3).unwrap() - 1.0).abs() < 1e-15);
        let p2 = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        assert!((nees(&DVector::from_vec(vec![2.0, 0.0]), &p2, 2).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(nees(&DVector::zeros(2), &DMatrix::zeros(2, 2), 2), Err(Error::SingularCovariance)));
    }

    #[test]
    fn nees_is_chi_square_mean_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let l = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.5, 2.0, 0.0, -0.3, 0.1, 0.7]);
        let p = &l * l.transpose();
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| {
                let w = DVector::from_fn(3, |_, _| StandardNormal.sample(&mut rng));
                nees(&(&l * w), &p, 3).unwrap()
            })
            .sum();
        let m = total / n as f64;
        assert!((0.98..=1.02).contains(&m), "{m}");
    }

    #[test]
    fn rmse_by_hand() {
        assert_eq!(rmse_series(&[vec![0.0; 4]]), (vec![0.0; 4], 0.0));
        let (s, avg) = rmse_series(&[vec![-2.0; 3]]);
        assert_eq!(s, vec![2.0; 3]);
        assert_eq!(avg, 2.0);
        let (s, _) = rmse_series(&[vec![3.0], vec![4.0]]);
        assert!((s[0] - 12.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mean_skips_missing_entries() {
        assert_eq!(mean(&[1.0, f64::NAN, 3.0]), 2.0);
        assert!(mean(&[f64::NAN]).is_nan());
    }
}
