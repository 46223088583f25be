//! Filter variants: atlas choice plus Jacobian evaluation policy.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use super::affine::{AffineVariant, AppAffine};
use super::model::{make_point_model, AppKind, AppModel, Odometry, SlamState, StandardChart};
use super::ri::{ri_observation_jacobian, ri_process_jacobians, RightInvariantChart};
use crate::atlas::{transform_covariance, AffineMap, Atlas};
use crate::ekf::{augment, FilterModel, GaussianBelief};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FilterVariant {
    Std,
    Ideal,
    Fej,
    Ri,
    AffV1,
    AffV2,
    Aff,
}

impl FilterVariant {
    pub const ALL: [FilterVariant; 7] = [Self::Std, Self::Ideal, Self::Fej, Self::Ri, Self::AffV1, Self::AffV2, Self::Aff];

    pub fn name(self) -> &'static str {
        match self {
            Self::Std => "std",
            Self::Ideal => "ideal",
            Self::Fej => "fej",
            Self::Ri => "ri",
            Self::AffV1 => "aff_v1",
            Self::AffV2 => "aff_v2",
            Self::Aff => "aff",
        }
    }

    /// Variants that make sense for an application, in display order.
    pub fn supported(kind: AppKind) -> Vec<FilterVariant> {
        Self::ALL.into_iter().filter(|v| make_variant(&AppModel { kind, features: 0 }, *v).is_ok()).collect()
    }
}

impl fmt::Display for FilterVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL.into_iter().find(|v| v.name() == t).ok_or_else(|| Error::Config {
            field: "variants".into(),
            message: format!("unknown variant '{s}' (expected one of std, ideal, fej, ri, aff_v1, aff_v2, aff)"),
        })
    }
}

/// The atlas a filter keeps its error state in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Chart {
    Standard,
    RightInvariant,
    Affine(AppAffine),
}

impl Chart {
    /// Differential at the origin of this chart composed with the inverse
    /// standard chart, so that `P_native = A P_std Aᵀ`.
    pub fn affine_matrix(&self, x: &SlamState) -> Result<DMatrix<f64>> {
        match self {
            Chart::Standard => Ok(DMatrix::identity(x.dim(), x.dim())),
            Chart::RightInvariant => v1(x).matrix(x),
            Chart::Affine(a) => a.matrix(x),
        }
    }

    pub fn affine_inverse(&self, x: &SlamState) -> Result<DMatrix<f64>> {
        match self {
            Chart::Standard => Ok(DMatrix::identity(x.dim(), x.dim())),
            Chart::RightInvariant => v1(x).inverse(x),
            Chart::Affine(a) => a.inverse(x),
        }
    }

    pub fn to_standard_cov(&self, x: &SlamState, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Chart::Standard => Ok(p.clone()),
            _ => Ok(transform_covariance(p, &self.affine_inverse(x)?)),
        }
    }

    pub fn from_standard_cov(&self, x: &SlamState, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            Chart::Standard => Ok(p.clone()),
            _ => Ok(transform_covariance(p, &self.affine_matrix(x)?)),
        }
    }
}

fn v1(x: &SlamState) -> AppAffine {
    AppAffine { model: make_point_model(x.landmarks.len() / 3), variant: AffineVariant::PointV1 }
}

impl Atlas<SlamState> for Chart {
    fn error(&self, center: &SlamState, x: &SlamState) -> Result<DVector<f64>> {
        match self {
            Chart::Standard => StandardChart.error(center, x),
            Chart::RightInvariant => RightInvariantChart.error(center, x),
            Chart::Affine(a) => Ok(a.matrix(center)? * StandardChart.error(center, x)?),
        }
    }

    fn retract(&self, center: &SlamState, eps: &DVector<f64>) -> Result<SlamState> {
        match self {
            Chart::Standard => StandardChart.retract(center, eps),
            Chart::RightInvariant => RightInvariantChart.retract(center, eps),
            Chart::Affine(a) => StandardChart.retract(center, &(a.inverse(center)? * eps)),
        }
    }
}

/// Where Jacobians are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    Estimate,
    Truth,
    FirstEstimates,
}

/// A bound filter: the model it runs on (the point model when the right
/// invariant filter ignores a height constraint), its chart and policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VariantConfig {
    pub variant: FilterVariant,
    pub model: AppModel,
    pub chart: Chart,
    pub policy: Policy,
}

pub fn make_variant(model: &AppModel, variant: FilterVariant) -> Result<VariantConfig> {
    let unsupported = || Error::VariantUnsupported { variant: variant.name().into(), app: model.name().into() };
    let (model, chart, policy) = match (variant, model.kind) {
        (FilterVariant::Std, _) => (*model, Chart::Standard, Policy::Estimate),
        (FilterVariant::Ideal, _) => (*model, Chart::Standard, Policy::Truth),
        (FilterVariant::Fej, _) => (*model, Chart::Standard, Policy::FirstEstimates),
        (FilterVariant::Ri, AppKind::Point | AppKind::ConstrainedPoint(_)) => {
            (make_point_model(model.features), Chart::RightInvariant, Policy::Estimate)
        }
        (FilterVariant::AffV1, AppKind::Point) => {
            (*model, Chart::Affine(AppAffine::new(*model, AffineVariant::PointV1)?), Policy::Estimate)
        }
        (FilterVariant::AffV2, AppKind::Point) => {
            (*model, Chart::Affine(AppAffine::new(*model, AffineVariant::PointV2)?), Policy::Estimate)
        }
        (FilterVariant::Aff, AppKind::ConstrainedPoint(_) | AppKind::Plane) => {
            (*model, Chart::Affine(AppAffine::for_model(*model)), Policy::Estimate)
        }
        _ => return Err(unsupported()),
    };
    Ok(VariantConfig { variant, model, chart, policy })
}

/// Linearization points for one propagation or update phase.
#[derive(Clone, Debug)]
pub enum Linearization {
    Estimate,
    /// Ground-truth states with landmarks in filter slot order.
    Truth { prev: SlamState, current: SlamState },
    FirstEstimates {
        /// Position predicted at the previous step.
        prev_pred_position: Vector3<f64>,
        /// Pose held fixed through the updates of a step.
        pose: Option<(Matrix3<f64>, Vector3<f64>)>,
        /// Landmark parameters as first initialised.
        landmarks: DVector<f64>,
    },
}

/// A [`VariantConfig`] with its linearization points, usable by the EKF.
pub struct SlamFilter<'a> {
    pub config: &'a VariantConfig,
    pub lin: Linearization,
}

impl<'a> SlamFilter<'a> {
    pub fn new(config: &'a VariantConfig, lin: Linearization) -> Self {
        Self { config, lin }
    }

    fn std_process(&self, prev: &SlamState, pred: &SlamState) -> (DMatrix<f64>, DMatrix<f64>) {
        let model = &self.config.model;
        let m = pred.dim();
        match &self.lin {
            Linearization::Truth { prev: tp, current: tc } => {
                (model.std_f(&tp.position, &tc.position, m), model.std_g(&tp.rotation, m))
            }
            Linearization::FirstEstimates { prev_pred_position, .. } => {
                (model.std_f(prev_pred_position, &pred.position, m), model.std_g(&prev.rotation, m))
            }
            Linearization::Estimate => (model.std_f(&prev.position, &pred.position, m), model.std_g(&prev.rotation, m)),
        }
    }

    fn std_observation(&self, x: &SlamState, j: usize) -> Result<DMatrix<f64>> {
        let model = &self.config.model;
        match &self.lin {
            Linearization::Truth { current, .. } => model.std_h(current, j),
            Linearization::FirstEstimates { pose, landmarks, .. } => {
                let (r, p) = pose.unwrap_or((x.rotation, x.position));
                model.std_h_at(&r, &p, landmarks, j)
            }
            Linearization::Estimate => model.std_h(x, j),
        }
    }
}

impl FilterModel<SlamState> for SlamFilter<'_> {
    type Control = Odometry;

    fn error(&self, center: &SlamState, x: &SlamState) -> Result<DVector<f64>> {
        self.config.chart.error(center, x)
    }

    fn retract(&self, center: &SlamState, eps: &DVector<f64>) -> Result<SlamState> {
        self.config.chart.retract(center, eps)
    }

    fn predict(&self, x: &SlamState, u: &Odometry) -> Result<SlamState> {
        Ok(self.config.model.process(x, u))
    }

    fn process_jacobians(&self, prev: &SlamState, pred: &SlamState, _u: &Odometry) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match &self.config.chart {
            Chart::Standard => Ok(self.std_process(prev, pred)),
            Chart::RightInvariant => Ok(ri_process_jacobians(prev, pred)),
            Chart::Affine(a) => {
                let (f, g) = self.std_process(prev, pred);
                let a_pred = a.matrix(pred)?;
                Ok((&a_pred * f * a.inverse(prev)?, a_pred * g))
            }
        }
    }

    fn observe(&self, x: &SlamState, index: usize) -> Result<DVector<f64>> {
        let z = self.config.model.observe(x, index)?;
        Ok(DVector::from_column_slice(z.as_slice()))
    }

    fn observation_jacobian(&self, x: &SlamState, index: usize) -> Result<DMatrix<f64>> {
        match &self.config.chart {
            Chart::Standard => self.std_observation(x, index),
            Chart::RightInvariant => ri_observation_jacobian(x, index),
            Chart::Affine(a) => Ok(self.std_observation(x, index)? * a.inverse(x)?),
        }
    }
}

/// Appends a landmark initialised from its first observation `z`. The
/// covariance is extended in the standard atlas and mapped back with the
/// enlarged affine matrix.
pub fn augment_feature(
    config: &VariantConfig,
    belief: &GaussianBelief<SlamState>,
    z: &Vector3<f64>,
    omega: &DMatrix<f64>,
) -> Result<GaussianBelief<SlamState>> {
    augment_feature_at(config, belief, z, omega, None)
}

/// As [`augment_feature`], with the initialisation Jacobians taken at
/// `lin = (state, observation)` instead of the estimate.
pub fn augment_feature_at(
    config: &VariantConfig,
    belief: &GaussianBelief<SlamState>,
    z: &Vector3<f64>,
    omega: &DMatrix<f64>,
    lin: Option<(&SlamState, &Vector3<f64>)>,
) -> Result<GaussianBelief<SlamState>> {
    let x = &belief.state;
    let mut init = config.model.init_landmark(x, z)?;
    if let Some((at, zt)) = lin {
        let j = config.model.init_landmark(at, zt)?;
        init.jac_state = j.jac_state;
        init.jac_noise = j.jac_noise;
    }
    let std_cov = config.chart.to_standard_cov(x, &belief.cov)?;
    let std_belief = GaussianBelief { state: x.clone(), cov: std_cov };
    let new_state = config.model.with_landmark(x, &init.params);
    let grown = augment(&std_belief, new_state, &init.jac_state, &init.jac_noise, omega)?;
    let cov = config.chart.from_standard_cov(&grown.state, &grown.cov)?;
    Ok(GaussianBelief { state: grown.state, cov })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::model::{make_cp_model, make_plane_model, random_odometry, random_state, HeightMode};
    use crate::atlas::{affine_from_chart, numeric_jacobians};
    use crate::ekf::{update, NoiseSpec};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1.0)
    }

    #[test]
    fn names_roundtrip_and_unknown_rejected() {
        for v in FilterVariant::ALL {
            assert_eq!(v.name().parse::<FilterVariant>().unwrap(), v);
        }
        assert_eq!("AFF-V1".parse::<FilterVariant>().unwrap(), FilterVariant::AffV1);
        assert!(matches!("kalman".parse::<FilterVariant>(), Err(Error::Config { ref field, .. }) if field == "variants"));
    }

    #[test]
    fn support_matrix() {
        let names = |kind| FilterVariant::supported(kind).iter().map(|v| v.name()).collect::<Vec<_>>().join(",");
        assert_eq!(names(AppKind::Point), "std,ideal,fej,ri,aff_v1,aff_v2");
        assert_eq!(names(AppKind::ConstrainedPoint(HeightMode::Unknown)), "std,ideal,fej,ri,aff");
        assert_eq!(names(AppKind::Plane), "std,ideal,fej,aff");
        let ri = make_variant(&make_cp_model(2, HeightMode::Known(1.0)), FilterVariant::Ri).unwrap();
        assert_eq!(ri.model.kind, AppKind::Point);
        assert!(matches!(make_variant(&make_plane_model(1), FilterVariant::Ri), Err(Error::VariantUnsupported { .. })));
    }

    #[test]
    fn chart_roundtrip_for_all_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let models = [make_point_model(2), make_cp_model(2, HeightMode::Unknown), make_plane_model(2)];
        for model in models {
            for v in FilterVariant::supported(model.kind) {
                let cfg = make_variant(&model, v).unwrap();
                for _ in 0..50 {
                    let c = random_state(&cfg.model, 2, 4.0, &mut rng);
                    let x = random_state(&cfg.model, 2, 4.0, &mut rng);
                    let x = SlamState { rotation: c.rotation * crate::liegroups::so3_exp(&Vector3::new(0.1, -0.05, 0.2)), ..x };
                    let e = cfg.chart.error(&c, &x).unwrap();
                    let back = cfg.chart.retract(&c, &e).unwrap();
                    assert!(StandardChart.error(&x, &back).unwrap().norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn ri_chart_differential_is_v1() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = make_point_model(3);
        for _ in 0..20 {
            let x = random_state(&model, 3, 4.0, &mut rng);
            let a = affine_from_chart(&RightInvariantChart, &StandardChart, &x).unwrap();
            let v = Chart::RightInvariant.affine_matrix(&x).unwrap();
            assert!(rel(&a, &v) < 1e-6);
        }
    }

    #[test]
    fn analytic_jacobians_match_chart_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let models = [make_point_model(2), make_cp_model(3, HeightMode::Known(-1.0)), make_cp_model(3, HeightMode::Unknown), make_plane_model(2)];
        for model in models {
            for v in [FilterVariant::Std, FilterVariant::Ri, FilterVariant::AffV1, FilterVariant::AffV2, FilterVariant::Aff] {
                let Ok(cfg) = make_variant(&model, v) else { continue };
                let filter = SlamFilter::new(&cfg, Linearization::Estimate);
                for _ in 0..20 {
                    let prev = random_state(&cfg.model, cfg.model.features, 4.0, &mut rng);
                    let u = random_odometry(&mut rng);
                    let pred = filter.predict(&prev, &u).unwrap();
                    let num = numeric_jacobians(
                        &cfg.chart,
                        |x: &SlamState, w: &DVector<f64>| Ok(cfg.model.process(x, &u.perturbed(w))),
                        |x: &SlamState| cfg.model.observe(x, 0).map(|z| DVector::from_column_slice(z.as_slice())),
                        &prev,
                        &pred,
                        6,
                    )
                    .unwrap();
                    let (f, g) = filter.process_jacobians(&prev, &pred, &u).unwrap();
                    let h = filter.observation_jacobian(&pred, 0).unwrap();
                    assert!(rel(&f, &num.f) < 1e-5, "{} F", v);
                    assert!(rel(&g, &num.g) < 1e-5, "{} G", v);
                    assert!(rel(&h, &num.h) < 1e-5, "{} H", v);
                }
            }
        }
    }

    #[test]
    fn fej_holds_first_landmark_estimate() {
        let model = make_point_model(1);
        let cfg = make_variant(&model, FilterVariant::Fej).unwrap();
        let x = SlamState::new(Matrix3::identity(), Vector3::zeros(), DVector::from_vec(vec![2.0, 0.0, 0.0]));
        let first = x.landmarks.clone();
        let moved = SlamState { landmarks: DVector::from_vec(vec![2.5, 0.3, 0.0]), ..x.clone() };
        let lin = Linearization::FirstEstimates { prev_pred_position: Vector3::zeros(), pose: None, landmarks: first };
        let h = SlamFilter::new(&cfg, lin).observation_jacobian(&moved, 0).unwrap();
        assert_relative_eq!(h, model.std_h(&x, 0).unwrap(), epsilon = 1e-15);
        assert!((h - model.std_h(&moved, 0).unwrap()).norm() > 0.1);
    }

    #[test]
    fn augmentation_matches_finite_difference_and_reobserves() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let noise = NoiseSpec::new(0.01, 0.02, 0.1).unwrap();
        let omega = noise.observation_cov(3);
        let models = [make_point_model(1), make_cp_model(1, HeightMode::Unknown), make_plane_model(1)];
        for model in models {
            for v in FilterVariant::supported(model.kind) {
                let cfg = make_variant(&model, v).unwrap();
                let base = random_state(&cfg.model, 0, 3.0, &mut rng);
                let g = DMatrix::<f64>::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.01);
                let p = cfg.chart.from_standard_cov(&base, &(&g * g.transpose() + DMatrix::identity(6, 6) * 1e-3)).unwrap();
                let belief = GaussianBelief::new(base.clone(), p).unwrap();
                let z = Vector3::new(0.5, -1.0, 2.0);
                let grown = augment_feature(&cfg, &belief, &z, &omega).unwrap();
                assert!(grown.is_valid());
                let n = grown.dim();
                // Feature marginal from a finite-difference Jacobian of the
                // initialisation map over (standard pose error, observation).
                let std_prior = cfg.chart.to_standard_cov(&base, &belief.cov).unwrap();
                let init_of = |e: &DVector<f64>| -> Result<DVector<f64>> {
                    let x = StandardChart.retract(&base, &e.rows(0, 6).into_owned())?;
                    let zz = z + Vector3::new(e[6], e[7], e[8]);
                    Ok(cfg.model.init_landmark(&x, &zz)?.params)
                };
                let jac = crate::atlas::central_difference(9, init_of).unwrap();
                let mut joint = DMatrix::zeros(9, 9);
                joint.view_mut((0, 0), (6, 6)).copy_from(&std_prior);
                joint.view_mut((6, 6), (3, 3)).copy_from(&omega);
                let expected = &jac * joint * jac.transpose();
                let std_grown = cfg.chart.to_standard_cov(&grown.state, &grown.cov).unwrap();
                let r = n - 6;
                assert!(rel(&std_grown.view((6, 6), (r, r)).into_owned(), &expected) < 1e-5, "{}", v);
                let filter = SlamFilter::new(&cfg, Linearization::Estimate);
                let zz = DVector::from_column_slice(z.as_slice());
                let after = update(&filter, &grown, 0, &zz, &omega).unwrap();
                assert!(StandardChart.error(&grown.state, &after.state).unwrap().norm() < 1e-9, "{}", v);
            }
        }
    }

    #[test]
    fn augmentation_at_other_point_keeps_estimate_and_uses_given_jacobians() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let omega = NoiseSpec::new(0.01, 0.02, 0.1).unwrap().observation_cov(3);
        let model = make_point_model(1);
        let cfg = make_variant(&model, FilterVariant::Ideal).unwrap();
        let x = random_state(&model, 0, 3.0, &mut rng);
        let other = random_state(&model, 0, 3.0, &mut rng);
        let belief = GaussianBelief::new(x.clone(), DMatrix::identity(6, 6) * 1e-2).unwrap();
        let z = Vector3::new(0.5, -1.0, 2.0);
        let zo = Vector3::new(1.0, 0.3, -0.4);
        let same = augment_feature_at(&cfg, &belief, &z, &omega, Some((&x, &z))).unwrap();
        assert_eq!(same, augment_feature(&cfg, &belief, &z, &omega).unwrap());
        let moved = augment_feature_at(&cfg, &belief, &z, &omega, Some((&other, &zo))).unwrap();
        assert_eq!(moved.state, same.state);
        let j = model.init_landmark(&other, &zo).unwrap();
        let cross = &j.jac_state * &belief.cov;
        assert_relative_eq!(moved.cov.view((6, 0), (3, 6)).into_owned(), cross, epsilon = 1e-12);
    }
}
