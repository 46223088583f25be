//! Driving one filter variant through a simulated run.

use std::fmt;

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::env::World;
use super::measure::{ideal_observation, Measurements};
use super::metrics::{block_nees, mean};
use crate::apps::{augment_feature_at, AppKind, Chart, HeightMode, Linearization, Policy, SlamFilter, SlamState, StandardChart, VariantConfig};
use crate::atlas::Atlas;
use crate::ekf::{propagate, update, GaussianBelief, NoiseSpec};
use crate::error::{Error, Result};
use crate::liegroups::project_to_rotation;

/// Rotation estimates are re-orthonormalised this often.
pub const REPROJECT_EVERY: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitMode {
    /// Landmarks enter the state when first seen.
    FirstObservation,
    /// All landmarks start in the state, perturbed from the truth by `sigma`
    /// with matching covariance.
    PriorMap { sigma: f64 },
}

/// Metrics of one filter at one step. Errors are in the standard atlas, NEES
/// in the filter's own atlas.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Norm of the rotation error (rad).
    pub err_ori: f64,
    /// Norm of the position error (m).
    pub err_pos: f64,
    /// Sum of squared landmark distances and the landmark count.
    pub feat_sq_sum: f64,
    pub feat_count: usize,
    pub nees_pose: f64,
    /// Mean per-landmark NEES; NaN with no landmarks.
    pub nees_feat: f64,
    /// Yaw component of the rotation error and its 3σ bound.
    pub err_yaw: f64,
    pub bound3s_yaw: f64,
    /// x component of the position error and its 3σ bound.
    pub err_x: f64,
    pub bound3s_x: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub belief: GaussianBelief<SlamState>,
    /// World feature id held by each landmark slot.
    pub slots: Vec<usize>,
}

#[derive(Debug)]
pub struct RunFailure {
    pub step: usize,
    pub error: Error,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "filter failed at step {}: {}", self.step, self.error)
    }
}

impl std::error::Error for RunFailure {}

/// Ground-truth landmark parameters for the given slots, in `model` layout.
pub fn truth_landmarks(config: &VariantConfig, world: &World, slots: &[usize]) -> DVector<f64> {
    let feats = slots.iter().map(|&j| world.features[j]);
    let values: Vec<f64> = match config.model.kind {
        AppKind::Point | AppKind::Plane => feats.flat_map(|f| [f.x, f.y, f.z]).collect(),
        AppKind::ConstrainedPoint(HeightMode::Known(_)) => feats.flat_map(|f| [f.x, f.y]).collect(),
        AppKind::ConstrainedPoint(HeightMode::Unknown) => {
            let c = slots.first().map(|&j| world.features[j].z);
            c.into_iter().chain(feats.flat_map(|f| [f.x, f.y])).collect()
        }
    };
    DVector::from_vec(values)
}

fn truth_state(config: &VariantConfig, world: &World, step: usize, slots: &[usize]) -> SlamState {
    let pose = &world.poses[step];
    SlamState::new(pose.rotation, pose.position, truth_landmarks(config, world, slots))
}

fn record(config: &VariantConfig, step: usize, est: &GaussianBelief<SlamState>, truth: &SlamState) -> Result<StepRecord> {
    let model = &config.model;
    let e = StandardChart.error(&est.state, truth)?;
    let k = model.feature_count(&est.state);
    let mut feat_sq_sum = 0.0;
    for j in 0..k {
        feat_sq_sum += (model.feature_point(truth, j)? - model.feature_point(&est.state, j)?).norm_squared();
    }
    let native = config.chart.error(&est.state, truth)?;
    let nees_pose = block_nees(&native, &est.cov, 0, 6)?;
    let per_feature =
        (0..k).map(|j| {
            let (o, len) = model.feature_block(j);
            block_nees(&native, &est.cov, o, len)
        });
    let nees_feat = mean(&per_feature.collect::<Result<Vec<_>>>()?);
    let (var_yaw, var_x) = match config.chart {
        Chart::Standard => (est.cov[(2, 2)], est.cov[(3, 3)]),
        _ => {
            let inv = config.chart.affine_inverse(&est.state)?;
            let quad = |r: usize| {
                let row = inv.row(r);
                (row * &est.cov * row.transpose())[(0, 0)]
            };
            (quad(2), quad(3))
        }
    };
    Ok(StepRecord {
        step,
        err_ori: e.fixed_rows::<3>(0).norm(),
        err_pos: e.fixed_rows::<3>(3).norm(),
        feat_sq_sum,
        feat_count: k,
        nees_pose,
        nees_feat,
        err_yaw: e[2],
        bound3s_yaw: 3.0 * var_yaw.max(0.0).sqrt(),
        err_x: e[3],
        bound3s_x: 3.0 * var_x.max(0.0).sqrt(),
    })
}

fn initial_belief(
    config: &VariantConfig,
    world: &World,
    init: InitMode,
    seed: u64,
) -> Result<(GaussianBelief<SlamState>, Vec<usize>)> {
    let pose = &world.poses[0];
    match init {
        InitMode::FirstObservation => {
            let x = SlamState::new(pose.rotation, pose.position, DVector::zeros(0));
            Ok((GaussianBelief { state: x, cov: DMatrix::zeros(6, 6) }, Vec::new()))
        }
        InitMode::PriorMap { sigma } => {
            if !(sigma > 0.0) {
                return Err(Error::Config { field: "run.prior_sigma".into(), message: format!("{sigma} is not positive") });
            }
            let slots: Vec<usize> = (0..world.features.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let truth = truth_landmarks(config, world, &slots);
            let noise = DVector::from_fn(truth.len(), |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
            let x = SlamState::new(pose.rotation, pose.position, truth + noise);
            let mut std_cov = DMatrix::zeros(x.dim(), x.dim());
            for i in 6..x.dim() {
                std_cov[(i, i)] = sigma * sigma;
            }
            let cov = config.chart.from_standard_cov(&x, &std_cov)?;
            Ok((GaussianBelief { state: x, cov }, slots))
        }
    }
}

/// Which world feature each landmark slot holds, and the landmark estimates
/// at initialisation.
struct LandmarkMap {
    slots: Vec<usize>,
    slot_of: Vec<Option<usize>>,
    first: DVector<f64>,
}

impl LandmarkMap {
    fn new(slots: Vec<usize>, features: usize, first: DVector<f64>) -> Self {
        let mut slot_of = vec![None; features];
        for (s, &j) in slots.iter().enumerate() {
            slot_of[j] = Some(s);
        }
        Self { slots, slot_of, first }
    }

    fn introduce(
        &mut self,
        config: &VariantConfig,
        belief: &mut GaussianBelief<SlamState>,
        world: &World,
        step: usize,
        j: usize,
        z: &Vector3<f64>,
        omega: &DMatrix<f64>,
    ) -> Result<()> {
        let before = belief.state.landmarks.len();
        let lin = match config.policy {
            Policy::Truth => {
                let t = truth_state(config, world, step, &self.slots);
                let zt = ideal_observation(config.model.kind, &t, &world.features[j]);
                Some((t, zt))
            }
            _ => None,
        };
        *belief = augment_feature_at(config, belief, z, omega, lin.as_ref().map(|(t, zt)| (t, zt)))?;
        let added = belief.state.landmarks.rows(before, belief.state.landmarks.len() - before).into_owned();
        let old = self.first.len();
        self.first = self.first.clone().resize_vertically(old + added.len(), 0.0);
        self.first.rows_mut(old, added.len()).copy_from(&added);
        self.slot_of[j] = Some(self.slots.len());
        self.slots.push(j);
        Ok(())
    }
}

/// Runs `config` over the measurements. `seed` is used only to draw the
/// prior map.
pub fn run_filter(
    config: &VariantConfig,
    world: &World,
    meas: &Measurements,
    noise: &NoiseSpec,
    init: InitMode,
    seed: u64,
) -> std::result::Result<RunOutput, RunFailure> {
    let at = |step: usize| move |error: Error| RunFailure { step, error };
    let sigma = noise.control_cov();
    let omega = noise.observation_cov(3);
    let (mut belief, slots) = initial_belief(config, world, init, seed).map_err(at(0))?;
    let mut map = LandmarkMap::new(slots, world.features.len(), belief.state.landmarks.clone());
    let mut prev_pred_position = belief.state.position;

    if init == InitMode::FirstObservation {
        for (j, z) in &meas.observations[0] {
            map.introduce(config, &mut belief, world, 0, *j, z, &omega).map_err(at(0))?;
        }
    }

    let mut records = Vec::with_capacity(meas.odometry.len());
    for n in 1..=meas.odometry.len() {
        let fail = at(n);
        let prop_lin = match config.policy {
            Policy::Estimate => Linearization::Estimate,
            Policy::Truth => Linearization::Truth {
                prev: truth_state(config, world, n - 1, &map.slots),
                current: truth_state(config, world, n, &map.slots),
            },
            Policy::FirstEstimates => Linearization::FirstEstimates { prev_pred_position, pose: None, landmarks: map.first.clone() },
        };
        belief = propagate(&SlamFilter::new(config, prop_lin), &belief, &meas.odometry[n - 1], &sigma).map_err(fail)?;
        prev_pred_position = belief.state.position;

        let upd_lin = match config.policy {
            Policy::Estimate => Linearization::Estimate,
            Policy::Truth => {
                let t = truth_state(config, world, n, &map.slots);
                Linearization::Truth { prev: t.clone(), current: t }
            }
            Policy::FirstEstimates => Linearization::FirstEstimates {
                prev_pred_position,
                pose: Some((belief.state.rotation, belief.state.position)),
                landmarks: map.first.clone(),
            },
        };
        let filter = SlamFilter::new(config, upd_lin);
        let mut fresh = Vec::new();
        for (j, z) in &meas.observations[n] {
            match map.slot_of[*j] {
                Some(s) => {
                    let zz = DVector::from_column_slice(z.as_slice());
                    belief = update(&filter, &belief, s, &zz, &omega).map_err(at(n))?;
                }
                None => fresh.push((*j, *z)),
            }
        }
        for (j, z) in fresh {
            map.introduce(config, &mut belief, world, n, j, &z, &omega).map_err(at(n))?;
        }
        if n % REPROJECT_EVERY == 0 {
            belief.state.rotation = project_to_rotation(&belief.state.rotation);
        }
        let truth = truth_state(config, world, n, &map.slots);
        records.push(record(config, n, &belief, &truth).map_err(at(n))?);
    }
    Ok(RunOutput { records, belief, slots: map.slots })
}
