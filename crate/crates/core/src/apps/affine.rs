//! Affine maps `A_X` and analytic unobservable subspaces in the standard atlas.
//!
//! Every shipped `A_X` has the block lower-triangular form
//!
//! ```text
//! [ I  0  0 ]
//! [ a  d  0 ]      rotation, position, landmark rows
//! [ b  c  e ]
//! ```
//!
//! with `d` and each diagonal block of `e` orthogonal, so the inverse is
//! available in closed form.

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::model::{plane_parts, AppKind, AppModel, HeightMode, SlamState};
use crate::atlas::AffineMap;
use crate::error::{Error, Result};
use crate::liegroups::skew;
use crate::observability::{SubspaceBasis, RANK_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AffineVariant {
    /// Point SLAM, `[[I,0,0],[p^,I,0],[f^,0,I]]`.
    PointV1,
    /// Point SLAM, `[[I,0,0],[Rᵀp^,Rᵀ,0],[Rᵀf^,0,Rᵀ]]`.
    PointV2,
    /// Constrained points, yaw column eliminated from position and landmarks.
    ConstrainedPoint,
    /// Closest-point planes.
    Plane,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppAffine {
    pub model: AppModel,
    pub variant: AffineVariant,
}

impl AppAffine {
    pub fn new(model: AppModel, variant: AffineVariant) -> Result<Self> {
        let ok = matches!(
            (model.kind, variant),
            (AppKind::Point, AffineVariant::PointV1 | AffineVariant::PointV2)
                | (AppKind::ConstrainedPoint(_), AffineVariant::ConstrainedPoint)
                | (AppKind::Plane, AffineVariant::Plane)
        );
        if !ok {
            return Err(Error::VariantUnsupported { variant: format!("{variant:?}"), app: model.name().into() });
        }
        Ok(Self { model, variant })
    }

    /// The default affine map of an application (v1 for points).
    pub fn for_model(model: AppModel) -> Self {
        let variant = match model.kind {
            AppKind::Point => AffineVariant::PointV1,
            AppKind::ConstrainedPoint(_) => AffineVariant::ConstrainedPoint,
            AppKind::Plane => AffineVariant::Plane,
        };
        Self { model, variant }
    }

    fn blocks(&self, x: &SlamState) -> Result<Blocks> {
        let m = x.dim();
        let l = m - 6;
        let p = x.position;
        let mut bl = Blocks { a: Matrix3::zeros(), d: Matrix3::identity(), b: DMatrix::zeros(l, 3), c: DMatrix::zeros(l, 3), e: None };
        let k = self.model.feature_count(x);
        match self.variant {
            AffineVariant::PointV1 => {
                bl.a = skew(&p);
                for j in 0..k {
                    bl.b.fixed_view_mut::<3, 3>(3 * j, 0).copy_from(&skew(&x.landmark3(j)));
                }
            }
            AffineVariant::PointV2 => {
                let rt = x.rotation.transpose();
                bl.a = rt * skew(&p);
                bl.d = rt;
                bl.e = Some(rt);
                for j in 0..k {
                    bl.b.fixed_view_mut::<3, 3>(3 * j, 0).copy_from(&(rt * skew(&x.landmark3(j))));
                }
            }
            AffineVariant::ConstrainedPoint => {
                bl.a[(0, 2)] = p.y;
                bl.a[(1, 2)] = -p.x;
                for j in 0..k {
                    let (o, _) = self.model.feature_block(j);
                    let f = self.model.feature_point(x, j)?;
                    bl.b[(o - 6, 2)] = f.y;
                    bl.b[(o - 5, 2)] = -f.x;
                }
            }
            AffineVariant::Plane => {
                let ph = skew(&p);
                bl.a = ph;
                for j in 0..k {
                    let q = x.landmark3(j);
                    let (d, n) = plane_parts(&q)?;
                    let nnt = n * n.transpose();
                    bl.b.fixed_view_mut::<3, 3>(3 * j, 0).copy_from(&(skew(&n) * d - nnt * ph));
                    bl.c.fixed_view_mut::<3, 3>(3 * j, 0).copy_from(&(-nnt));
                }
            }
        }
        Ok(bl)
    }
}

struct Blocks {
    a: Matrix3<f64>,
    d: Matrix3<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    /// Diagonal landmark block (identity when `None`), repeated per 3 rows.
    e: Option<Matrix3<f64>>,
}

impl Blocks {
    fn apply_e(&self, m: &DMatrix<f64>, transpose: bool) -> DMatrix<f64> {
        let Some(e) = self.e else { return m.clone() };
        let e = if transpose { e.transpose() } else { e };
        let mut out = m.clone();
        for j in 0..m.nrows() / 3 {
            let blk = e * m.fixed_rows::<3>(3 * j);
            out.fixed_rows_mut::<3>(3 * j).copy_from(&blk);
        }
        out
    }

    fn assemble(&self, a: &Matrix3<f64>, d: &Matrix3<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, e: Option<Matrix3<f64>>) -> DMatrix<f64> {
        let l = b.nrows();
        let mut out = DMatrix::identity(6 + l, 6 + l);
        out.fixed_view_mut::<3, 3>(3, 0).copy_from(a);
        out.fixed_view_mut::<3, 3>(3, 3).copy_from(d);
        out.view_mut((6, 0), (l, 3)).copy_from(b);
        out.view_mut((6, 3), (l, 3)).copy_from(c);
        if let Some(e) = e {
            for j in 0..l / 3 {
                out.fixed_view_mut::<3, 3>(6 + 3 * j, 6 + 3 * j).copy_from(&e);
            }
        }
        out
    }

    fn matrix(&self) -> DMatrix<f64> {
        self.assemble(&self.a, &self.d, &self.b, &self.c, self.e)
    }

    fn inverse(&self) -> DMatrix<f64> {
        let dt = self.d.transpose();
        let dta = dt * self.a;
        let c_dt = &self.c * DMatrix::from_column_slice(3, 3, dt.as_slice());
        let a_dyn = DMatrix::from_column_slice(3, 3, self.a.as_slice());
        let b_inv = self.apply_e(&(&c_dt * a_dyn - &self.b), true);
        let c_inv = -self.apply_e(&c_dt, true);
        self.assemble(&(-dta), &dt, &b_inv, &c_inv, self.e.map(|e| e.transpose()))
    }
}

impl AffineMap<SlamState> for AppAffine {
    fn matrix(&self, x: &SlamState) -> Result<DMatrix<f64>> {
        Ok(self.blocks(x)?.matrix())
    }

    fn inverse(&self, x: &SlamState) -> Result<DMatrix<f64>> {
        Ok(self.blocks(x)?.inverse())
    }
}

/// Columns spanning the unobservable subspace of the true system in the
/// standard atlas, evaluated at `x`.
pub fn true_nullspace_matrix(model: &AppModel, x: &SlamState) -> Result<DMatrix<f64>> {
    let m = x.dim();
    let p = x.position;
    let k = model.feature_count(x);
    let yaw = |v: Vector3<f64>| Vector3::new(-v.y, v.x, 0.0);
    match model.kind {
        AppKind::Point => {
            let mut n = DMatrix::zeros(m, 6);
            n.fixed_view_mut::<3, 3>(0, 0).fill_with_identity();
            n.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-skew(&p)));
            n.fixed_view_mut::<3, 3>(3, 3).fill_with_identity();
            for j in 0..k {
                n.fixed_view_mut::<3, 3>(6 + 3 * j, 0).copy_from(&(-skew(&x.landmark3(j))));
                n.fixed_view_mut::<3, 3>(6 + 3 * j, 3).fill_with_identity();
            }
            Ok(n)
        }
        AppKind::ConstrainedPoint(mode) => {
            let ntrans = if mode == HeightMode::Unknown { 3 } else { 2 };
            let mut n = DMatrix::zeros(m, ntrans + 1);
            for t in 0..ntrans {
                n[(3 + t, t)] = 1.0;
            }
            if mode == HeightMode::Unknown && k > 0 {
                n[(6, 2)] = 1.0;
            }
            n[(2, ntrans)] = 1.0;
            n.fixed_view_mut::<3, 1>(3, ntrans).copy_from(&yaw(p));
            for j in 0..k {
                let (o, _) = model.feature_block(j);
                let f = model.feature_point(x, j)?;
                n[(o, 0)] = 1.0;
                n[(o + 1, 1)] = 1.0;
                n[(o, ntrans)] = -f.y;
                n[(o + 1, ntrans)] = f.x;
            }
            Ok(n)
        }
        AppKind::Plane => {
            let mut n = DMatrix::zeros(m, 6);
            n.fixed_view_mut::<3, 3>(0, 3).fill_with_identity();
            n.fixed_view_mut::<3, 3>(3, 0).fill_with_identity();
            n.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-skew(&p)));
            for j in 0..k {
                let q = x.landmark3(j);
                let (_, nv) = plane_parts(&q)?;
                n.fixed_view_mut::<3, 3>(6 + 3 * j, 0).copy_from(&(nv * nv.transpose()));
                n.fixed_view_mut::<3, 3>(6 + 3 * j, 3).copy_from(&(-skew(&q)));
            }
            Ok(n)
        }
    }
}

pub fn true_nullspace(model: &AppModel, x: &SlamState) -> Result<SubspaceBasis> {
    Ok(SubspaceBasis::from_columns(&true_nullspace_matrix(model, x)?, RANK_TOL))
}
