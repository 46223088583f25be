use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

use crate::atlas::Atlas;
use crate::error::{Error, Result};
use crate::liegroups::{skew, so3_exp, so3_log};

/// Planes closer than this to the origin are rejected.
pub const PLANE_MIN_DISTANCE: f64 = 0.05;

/// Robot pose plus an application-interpreted landmark vector.
///
/// | application          | landmark layout                  |
/// |----------------------|----------------------------------|
/// | point                | `[f₁ (3), …, f_K (3)]`           |
/// | constrained, known c | `[x₁, y₁, …, x_K, y_K]`          |
/// | constrained, unknown | `[c, x₁, y₁, …]` (empty if K = 0)|
/// | plane                | `[d₁n₁ (3), …, d_K n_K (3)]`     |
#[derive(Clone, Debug, PartialEq)]
pub struct SlamState {
    pub rotation: Matrix3<f64>,
    pub position: Vector3<f64>,
    pub landmarks: DVector<f64>,
}

impl SlamState {
    pub fn new(rotation: Matrix3<f64>, position: Vector3<f64>, landmarks: DVector<f64>) -> Self {
        Self { rotation, position, landmarks }
    }

    pub fn dim(&self) -> usize {
        6 + self.landmarks.len()
    }

    pub fn landmark3(&self, j: usize) -> Vector3<f64> {
        self.landmarks.fixed_rows::<3>(3 * j).into()
    }
}

/// Relative motion `(R_u, p_u)` between consecutive poses.
#[derive(Clone, Debug, PartialEq)]
pub struct Odometry {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Odometry {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// The motion taking `from` to `to`.
    pub fn between(from: &SlamState, to: &SlamState) -> Self {
        let rt = from.rotation.transpose();
        Self { rotation: rt * to.rotation, translation: rt * (to.position - from.position) }
    }

    /// `(exp(w₁) R_u, p_u + w₂)` for a 6-vector `w = (w₁, w₂)`.
    pub fn perturbed(&self, w: &DVector<f64>) -> Self {
        let w1 = Vector3::new(w[0], w[1], w[2]);
        let w2 = Vector3::new(w[3], w[4], w[5]);
        Self { rotation: so3_exp(&w1) * self.rotation, translation: self.translation + w2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeightMode {
    Known(f64),
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AppKind {
    Point,
    ConstrainedPoint(HeightMode),
    Plane,
}

impl AppKind {
    pub fn name(&self) -> &'static str {
        match self {
            AppKind::Point => "point",
            AppKind::ConstrainedPoint(HeightMode::Known(_)) => "cp_known",
            AppKind::ConstrainedPoint(HeightMode::Unknown) => "cp_unknown",
            AppKind::Plane => "plane",
        }
    }
}

/// Standard chart: `(log(R R̂ᵀ), p − p̂, l − l̂)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct StandardChart;

impl Atlas<SlamState> for StandardChart {
    fn error(&self, center: &SlamState, x: &SlamState) -> Result<DVector<f64>> {
        if center.landmarks.len() != x.landmarks.len() {
            return Err(Error::DimensionMismatch(format!("{} vs {} landmark entries", center.landmarks.len(), x.landmarks.len())));
        }
        let w = so3_log(&(x.rotation * center.rotation.transpose())).map_err(|e| Error::OutOfChart(e.to_string()))?;
        let mut e = DVector::zeros(x.dim());
        e.fixed_rows_mut::<3>(0).copy_from(&w);
        e.fixed_rows_mut::<3>(3).copy_from(&(x.position - center.position));
        e.rows_mut(6, x.landmarks.len()).copy_from(&(&x.landmarks - &center.landmarks));
        Ok(e)
    }

    fn retract(&self, center: &SlamState, eps: &DVector<f64>) -> Result<SlamState> {
        if eps.len() != center.dim() {
            return Err(Error::DimensionMismatch(format!("error of length {} for a {}-dimensional state", eps.len(), center.dim())));
        }
        let w = Vector3::new(eps[0], eps[1], eps[2]);
        Ok(SlamState {
            rotation: so3_exp(&w) * center.rotation,
            position: center.position + eps.fixed_rows::<3>(3),
            landmarks: &center.landmarks + eps.rows(6, center.landmarks.len()),
        })
    }
}

/// One SLAM application: process and observation models, analytic
/// standard-atlas Jacobians and landmark initialisation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppModel {
    pub kind: AppKind,
    /// Number of landmarks the model is sized for (used by [`AppModel::dim`]).
    pub features: usize,
}

pub fn make_point_model(k: usize) -> AppModel {
    AppModel { kind: AppKind::Point, features: k }
}

pub fn make_cp_model(k: usize, height: HeightMode) -> AppModel {
    AppModel { kind: AppKind::ConstrainedPoint(height), features: k }
}

pub fn make_plane_model(k: usize) -> AppModel {
    AppModel { kind: AppKind::Plane, features: k }
}

/// Parameters contributed by a newly initialised landmark, with the first-order
/// model `δnew = J_x δ + J_v v` in the standard atlas.
#[derive(Clone, Debug)]
pub struct LandmarkInit {
    pub params: DVector<f64>,
    pub jac_state: DMatrix<f64>,
    pub jac_noise: DMatrix<f64>,
}

impl AppModel {
    pub fn with_features(self, k: usize) -> Self {
        Self { features: k, ..self }
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        6 + self.landmark_len(self.features)
    }

    pub fn landmark_len(&self, k: usize) -> usize {
        match self.kind {
            AppKind::Point | AppKind::Plane => 3 * k,
            AppKind::ConstrainedPoint(HeightMode::Known(_)) => 2 * k,
            AppKind::ConstrainedPoint(HeightMode::Unknown) => {
                if k == 0 {
                    0
                } else {
                    1 + 2 * k
                }
            }
        }
    }

    pub fn feature_count(&self, x: &SlamState) -> usize {
        let n = x.landmarks.len();
        match self.kind {
            AppKind::Point | AppKind::Plane => n / 3,
            AppKind::ConstrainedPoint(HeightMode::Known(_)) => n / 2,
            AppKind::ConstrainedPoint(HeightMode::Unknown) => n.saturating_sub(1) / 2,
        }
    }

    /// Offset (in the error vector) and size of landmark `j`'s own parameters.
    pub fn feature_block(&self, j: usize) -> (usize, usize) {
        match self.kind {
            AppKind::Point | AppKind::Plane => (6 + 3 * j, 3),
            AppKind::ConstrainedPoint(HeightMode::Known(_)) => (6 + 2 * j, 2),
            AppKind::ConstrainedPoint(HeightMode::Unknown) => (7 + 2 * j, 2),
        }
    }

    fn check_index(&self, x: &SlamState, j: usize) -> Result<()> {
        let count = self.feature_count(x);
        if j >= count {
            return Err(Error::IndexOutOfRange { index: j, count });
        }
        Ok(())
    }

    /// Shared height of constrained points.
    pub fn height(&self, x: &SlamState) -> Option<f64> {
        match self.kind {
            AppKind::ConstrainedPoint(HeightMode::Known(c)) => Some(c),
            AppKind::ConstrainedPoint(HeightMode::Unknown) => x.landmarks.iter().next().copied(),
            _ => None,
        }
    }

    /// Landmark `j` as a 3-vector: the point for point-like applications,
    /// the closest point `d·n` for planes.
    pub fn feature_point(&self, x: &SlamState, j: usize) -> Result<Vector3<f64>> {
        self.check_index(x, j)?;
        Ok(match self.kind {
            AppKind::Point | AppKind::Plane => x.landmark3(j),
            AppKind::ConstrainedPoint(_) => {
                let (o, _) = self.feature_block(j);
                let c = self.height(x).unwrap_or(0.0);
                Vector3::new(x.landmarks[o - 6], x.landmarks[o - 5], c)
            }
        })
    }

    /// `(R R_u, p + R p_u, landmarks)`.
    pub fn process(&self, x: &SlamState, u: &Odometry) -> SlamState {
        SlamState {
            rotation: x.rotation * u.rotation,
            position: x.position + x.rotation * u.translation,
            landmarks: x.landmarks.clone(),
        }
    }

    pub fn observe(&self, x: &SlamState, j: usize) -> Result<Vector3<f64>> {
        let f = self.feature_point(x, j)?;
        let rt = x.rotation.transpose();
        match self.kind {
            AppKind::Plane => {
                let (d, n) = plane_parts(&f)?;
                Ok(rt * n * (d - x.position.dot(&n)))
            }
            _ => Ok(rt * (f - x.position)),
        }
    }

    /// Standard-atlas `F` for a step whose positions move from `p_prev` to `p_pred`.
    pub fn std_f(&self, p_prev: &Vector3<f64>, p_pred: &Vector3<f64>, m: usize) -> DMatrix<f64> {
        let mut f = DMatrix::identity(m, m);
        f.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-skew(&(p_pred - p_prev))));
        f
    }

    /// Standard-atlas `G` for odometry noise applied at rotation `r_prev`.
    pub fn std_g(&self, r_prev: &Matrix3<f64>, m: usize) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(m, 6);
        g.fixed_view_mut::<3, 3>(0, 0).copy_from(r_prev);
        g.fixed_view_mut::<3, 3>(3, 3).copy_from(r_prev);
        g
    }

    /// Standard-atlas observation Jacobian of landmark `j` evaluated at the
    /// pose `(r, p)` and the landmark parameters in `landmarks`.
    pub fn std_h_at(&self, r: &Matrix3<f64>, p: &Vector3<f64>, landmarks: &DVector<f64>, j: usize) -> Result<DMatrix<f64>> {
        let x = SlamState { rotation: *r, position: *p, landmarks: landmarks.clone() };
        self.std_h(&x, j)
    }

    pub fn std_h(&self, x: &SlamState, j: usize) -> Result<DMatrix<f64>> {
        let f = self.feature_point(x, j)?;
        let m = x.dim();
        let rt = x.rotation.transpose();
        let mut h = DMatrix::zeros(3, m);
        let (o, _) = self.feature_block(j);
        match self.kind {
            AppKind::Point => {
                h.fixed_view_mut::<3, 3>(0, 0).copy_from(&(rt * skew(&(f - x.position))));
                h.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-rt));
                h.fixed_view_mut::<3, 3>(0, o).copy_from(&rt);
            }
            AppKind::ConstrainedPoint(mode) => {
                h.fixed_view_mut::<3, 3>(0, 0).copy_from(&(rt * skew(&(f - x.position))));
                h.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-rt));
                h.fixed_view_mut::<3, 2>(0, o).copy_from(&rt.fixed_view::<3, 2>(0, 0));
                if mode == HeightMode::Unknown {
                    h.fixed_view_mut::<3, 1>(0, 6).copy_from(&rt.column(2));
                }
            }
            AppKind::Plane => {
                let (d, n) = plane_parts(&f)?;
                let s = d - x.position.dot(&n);
                let nnt = n * n.transpose();
                let h1 = skew(&n) * s;
                let h3 = (Matrix3::identity() * s - n * x.position.transpose() + nnt * (2.0 * n.dot(&x.position))) / d;
                h.fixed_view_mut::<3, 3>(0, 0).copy_from(&(rt * h1));
                h.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-(rt * nnt)));
                h.fixed_view_mut::<3, 3>(0, o).copy_from(&(rt * h3));
            }
        }
        Ok(h)
    }

    /// All landmark Jacobians stacked in slot order.
    pub fn std_h_stacked(&self, x: &SlamState) -> Result<DMatrix<f64>> {
        let k = self.feature_count(x);
        let m = x.dim();
        let mut h = DMatrix::zeros(3 * k, m);
        for j in 0..k {
            h.view_mut((3 * j, 0), (3, m)).copy_from(&self.std_h(x, j)?);
        }
        Ok(h)
    }

    /// Initialise a landmark from its first observation `z` at pose estimate `x`.
    pub fn init_landmark(&self, x: &SlamState, z: &Vector3<f64>) -> Result<LandmarkInit> {
        let m = x.dim();
        let r = x.rotation;
        let rz = r * z;
        let world = x.position + rz;
        // First-order model of the world point p + R z in the standard atlas.
        let mut jw = DMatrix::zeros(3, m);
        jw.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&rz)));
        jw.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        let jv = DMatrix::from_iterator(3, 3, r.iter().copied());
        match self.kind {
            AppKind::Point => Ok(LandmarkInit { params: DVector::from_column_slice(world.as_slice()), jac_state: jw, jac_noise: jv }),
            AppKind::ConstrainedPoint(mode) => {
                let rows: Vec<usize> = if mode == HeightMode::Unknown && x.landmarks.is_empty() { vec![2, 0, 1] } else { vec![0, 1] };
                Ok(LandmarkInit {
                    params: DVector::from_iterator(rows.len(), rows.iter().map(|&i| world[i])),
                    jac_state: jw.select_rows(&rows),
                    jac_noise: jv.select_rows(&rows),
                })
            }
            AppKind::Plane => {
                let rho = rz.norm();
                if rho < 1e-6 {
                    return Err(Error::DegenerateObservation(format!("plane observation of norm {rho:e}")));
                }
                let n = rz / rho;
                let pn = x.position.dot(&n);
                let d = rho + pn;
                if d < PLANE_MIN_DISTANCE {
                    return Err(Error::DegeneratePlane(d));
                }
                let proj = Matrix3::identity() - n * n.transpose();
                let dq_dw = Matrix3::identity() + (proj * pn + n * x.position.transpose() * proj) / rho;
                let mut js = DMatrix::zeros(3, m);
                js.fixed_view_mut::<3, 3>(0, 0).copy_from(&(dq_dw * (-skew(&rz))));
                js.fixed_view_mut::<3, 3>(0, 3).copy_from(&(n * n.transpose()));
                let jn = dq_dw * r;
                Ok(LandmarkInit {
                    params: DVector::from_column_slice((n * d).as_slice()),
                    jac_state: js,
                    jac_noise: DMatrix::from_iterator(3, 3, jn.iter().copied()),
                })
            }
        }
    }

    /// Appends an initialised landmark to a state.
    pub fn with_landmark(&self, x: &SlamState, params: &DVector<f64>) -> SlamState {
        let mut l = x.landmarks.clone().resize_vertically(x.landmarks.len() + params.len(), 0.0);
        l.rows_mut(x.landmarks.len(), params.len()).copy_from(params);
        SlamState { rotation: x.rotation, position: x.position, landmarks: l }
    }
}

/// `(d, n)` from a closest-point vector.
pub fn plane_parts(q: &Vector3<f64>) -> Result<(f64, Vector3<f64>)> {
    let d = q.norm();
    if d < PLANE_MIN_DISTANCE {
        return Err(Error::DegeneratePlane(d));
    }
    Ok((d, q / d))
}

/// Uniformly random rotation.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() <= 1.0 && v.norm() > 1e-3 {
            let angle = rng.random_range(0.0..3.0);
            return so3_exp(&(v.normalize() * angle));
        }
    }
}

/// A random state with `k` landmarks, positions within `scale` metres.
pub fn random_state<R: Rng + ?Sized>(model: &AppModel, k: usize, scale: f64, rng: &mut R) -> SlamState {
    let mut coord = || rng.random_range(-scale..scale);
    let position = Vector3::new(coord(), coord(), coord());
    let landmarks = match model.kind {
        AppKind::Point => DVector::from_fn(3 * k, |_, _| rng.random_range(-scale..scale)),
        AppKind::ConstrainedPoint(HeightMode::Known(_)) => DVector::from_fn(2 * k, |_, _| rng.random_range(-scale..scale)),
        AppKind::ConstrainedPoint(HeightMode::Unknown) => {
            if k == 0 {
                DVector::zeros(0)
            } else {
                DVector::from_fn(1 + 2 * k, |_, _| rng.random_range(-scale..scale))
            }
        }
        AppKind::Plane => {
            let mut l = DVector::zeros(3 * k);
            for j in 0..k {
                let n = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    .try_normalize(1e-6)
                    .unwrap_or(Vector3::z());
                let d = rng.random_range(0.5..scale.max(1.0) + 0.5);
                l.fixed_rows_mut::<3>(3 * j).copy_from(&(n * d));
            }
            l
        }
    };
    SlamState { rotation: random_rotation(rng), position, landmarks }
}

/// A random odometry increment of moderate size.
pub fn random_odometry<R: Rng + ?Sized>(rng: &mut R) -> Odometry {
    let w = Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Odometry { rotation: so3_exp(&w), translation: t }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(p: [f64; 3], l: &[f64]) -> SlamState {
        SlamState::new(Matrix3::identity(), Vector3::from(p), DVector::from_row_slice(l))
    }

    #[test]
    fn model_dimensions() {
        assert_eq!(make_point_model(1).dim(), 9);
        assert_eq!(make_cp_model(2, HeightMode::Unknown).dim(), 11);
        assert_eq!(make_cp_model(2, HeightMode::Known(1.0)).dim(), 10);
        assert_eq!(make_plane_model(3).dim(), 15);
    }

    #[test]
    fn observations_by_hand() {
        let pm = make_point_model(1);
        assert_eq!(pm.observe(&state([0.0; 3], &[1.0, 2.0, 3.0]), 0).unwrap(), Vector3::new(1.0, 2.0, 3.0));
        let cp = make_cp_model(1, HeightMode::Known(2.0));
        assert_eq!(cp.observe(&state([0.0; 3], &[1.0, 1.0]), 0).unwrap(), Vector3::new(1.0, 1.0, 2.0));
        let pl = make_plane_model(1);
        let z = pl.observe(&state([0.0, 0.0, 0.5], &[0.0, 0.0, 2.0]), 0).unwrap();
        assert!((z - Vector3::new(0.0, 0.0, 1.5)).norm() < 1e-15);
        assert!(matches!(pm.observe(&state([0.0; 3], &[1.0, 2.0, 3.0]), 1), Err(Error::IndexOutOfRange { index: 1, count: 1 })));
        assert!(matches!(pl.observe(&state([0.0; 3], &[0.0, 0.0, 0.01]), 0), Err(Error::DegeneratePlane(_))));
    }

    #[test]
    fn process_composition() {
        let pm = make_point_model(0);
        let x = state([0.0; 3], &[]);
        assert_eq!(pm.process(&x, &Odometry::identity()), x);
        let u = Odometry { rotation: Matrix3::identity(), translation: Vector3::x() };
        assert_eq!(pm.process(&x, &u).position, Vector3::x());

        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let x = random_state(&pm, 2, 5.0, &mut rng);
            let (u1, u2) = (random_odometry(&mut rng), random_odometry(&mut rng));
            let two = pm.process(&pm.process(&x, &u1), &u2);
            let composed = Odometry { rotation: u1.rotation * u2.rotation, translation: u1.translation + u1.rotation * u2.translation };
            let one = pm.process(&x, &composed);
            assert!((two.rotation - one.rotation).norm() < 1e-12);
            assert!((two.position - one.position).norm() < 1e-12);
            let back = Odometry::between(&x, &one);
            assert!((back.rotation - composed.rotation).norm() < 1e-12);
            assert!((back.translation - composed.translation).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobian_shapes_at_identity() {
        let pm = make_point_model(1);
        let x = state([0.0; 3], &[1.0, 2.0, 3.0]);
        let h = pm.std_h(&x, 0).unwrap();
        let f = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(h.fixed_view::<3, 3>(0, 0).clone_owned(), skew(&f));
        assert_eq!(h.fixed_view::<3, 3>(0, 3).clone_owned(), -Matrix3::identity());
        assert_eq!(h.fixed_view::<3, 3>(0, 6).clone_owned(), Matrix3::identity());
        let g = pm.std_g(&Matrix3::identity(), 9);
        let mut expected = DMatrix::zeros(9, 6);
        expected.view_mut((0, 0), (6, 6)).fill_with_identity();
        assert_eq!(g, expected);
    }

    #[test]
    fn standard_chart_roundtrip_and_translation() {
        let pm = make_point_model(2);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let x = state([0.0; 3], &[0.0; 3]);
        let mut y = x.clone();
        y.position.x += 1.0;
        let e = StandardChart.error(&x, &y).unwrap();
        assert_eq!(e.as_slice(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for _ in 0..1000 {
            let c = random_state(&pm, 2, 5.0, &mut rng);
            let eps = DVector::from_fn(c.dim(), |_, _| rng.random_range(-0.1..0.1));
            let x = StandardChart.retract(&c, &eps).unwrap();
            assert!((StandardChart.error(&c, &x).unwrap() - &eps).norm() < 1e-9);
        }
    }

    #[test]
    fn landmark_initialisation_inverts_observation() {
        let pm = make_point_model(0);
        let x = state([0.0; 3], &[]);
        let init = pm.init_landmark(&x, &Vector3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(init.params.as_slice(), &[1.0, 2.0, 3.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for model in [make_point_model(0), make_cp_model(0, HeightMode::Unknown), make_cp_model(0, HeightMode::Known(-1.0)), make_plane_model(0)] {
            for k in 0..3 {
                let x = random_state(&model, k, 3.0, &mut rng);
                let truth = random_state(&model, 1, 3.0, &mut rng);
                let f = model.feature_point(&truth, 0).unwrap();
                let one = SlamState { landmarks: DVector::from_column_slice(f.as_slice()), ..x.clone() };
                let z = make_app_like(&model).observe(&one, 0).unwrap();
                let init = model.init_landmark(&x, &z).unwrap();
                let aug = model.with_landmark(&x, &init.params);
                let zz = model.observe(&aug, model.feature_count(&aug) - 1).unwrap();
                let exact = match model.kind {
                    AppKind::Point | AppKind::Plane => true,
                    AppKind::ConstrainedPoint(HeightMode::Unknown) => k == 0,
                    AppKind::ConstrainedPoint(HeightMode::Known(_)) => false,
                };
                if exact {
                    assert!((zz - z).norm() < 1e-9, "{:?} {zz} {z}", model.kind);
                }
            }
        }
        assert!(matches!(make_plane_model(0).init_landmark(&x, &Vector3::zeros()), Err(Error::DegenerateObservation(_))));
    }

    fn make_app_like(model: &AppModel) -> AppModel {
        match model.kind {
            AppKind::Plane => make_plane_model(1),
            _ => make_point_model(1),
        }
    }
}
