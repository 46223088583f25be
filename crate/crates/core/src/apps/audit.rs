//! Observability audit of the filter variants on randomized noisy trajectories.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::affine::true_nullspace_matrix;
use super::model::{random_odometry, random_state, AppModel, Odometry, SlamState, StandardChart};
use super::variant::{make_variant, FilterVariant, Linearization, Policy, SlamFilter, VariantConfig};
use crate::atlas::Atlas;
use crate::ekf::FilterModel;
use crate::error::Result;
use crate::exec::{self, Execution};
use crate::observability::{
    check_condition_i, check_condition_ii, check_constant_nullspace, check_observability_constraint, nullspace_basis,
    observability_matrix, ObservabilitySequence, SubspaceBasis, RANK_TOL,
};

/// A ground-truth trajectory with the estimates a filter would hold along it.
#[derive(Clone, Debug)]
pub struct NoisyTrajectory {
    pub truth: Vec<SlamState>,
    pub controls: Vec<Odometry>,
    /// `X_{i|i-1}`; the first entry is the prior.
    pub predicted: Vec<SlamState>,
    /// `X_{i|i}`.
    pub updated: Vec<SlamState>,
    /// Landmark estimates at initialisation.
    pub first_landmarks: DVector<f64>,
}

fn perturb<R: Rng + ?Sized>(x: &SlamState, sigma: f64, rng: &mut R) -> Result<SlamState> {
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let e = DVector::from_fn(x.dim(), |_, _| sigma * rng.sample::<f64, _>(StandardNormal));
    StandardChart.retract(x, &e)
}

/// `len` states along random odometry with estimates perturbed by `sigma`
/// (in standard-atlas coordinates) at every prediction and update.
pub fn random_trajectory<R: Rng + ?Sized>(
    model: &AppModel,
    len: usize,
    scale: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<NoisyTrajectory> {
    let x0 = random_state(model, model.features, scale, rng);
    let mut truth = vec![x0];
    let mut controls = Vec::with_capacity(len.saturating_sub(1));
    for i in 1..len {
        let u = random_odometry(rng);
        truth.push(model.process(&truth[i - 1], &u));
        controls.push(u);
    }
    let mut predicted = vec![perturb(&truth[0], sigma, rng)?];
    let first_landmarks = predicted[0].landmarks.clone();
    let mut updated = vec![perturb(&predicted[0], sigma, rng)?];
    for i in 1..len {
        let noisy = controls[i - 1].perturbed(&DVector::from_fn(6, |_, _| sigma * rng.sample::<f64, _>(StandardNormal)));
        let pred = model.process(&updated[i - 1], &noisy);
        updated.push(perturb(&pred, sigma, rng)?);
        predicted.push(pred);
    }
    Ok(NoisyTrajectory { truth, controls, predicted, updated, first_landmarks })
}

fn stacked_h(filter: &SlamFilter<'_>, x: &SlamState) -> Result<DMatrix<f64>> {
    let k = filter.config.model.feature_count(x);
    let m = x.dim();
    let mut h = DMatrix::zeros(3 * k, m);
    for j in 0..k {
        h.view_mut((3 * j, 0), (3, m)).copy_from(&filter.observation_jacobian(x, j)?);
    }
    Ok(h)
}

/// The true system linearised along the ground truth, in the variant's chart.
pub fn truth_sequence(config: &VariantConfig, traj: &NoisyTrajectory) -> Result<ObservabilitySequence> {
    let filter = SlamFilter::new(config, Linearization::Estimate);
    let n = traj.truth.len();
    let h = traj.truth.iter().map(|x| stacked_h(&filter, x)).collect::<Result<Vec<_>>>()?;
    let f = (0..n - 1)
        .map(|i| Ok(filter.process_jacobians(&traj.truth[i], &traj.truth[i + 1], &traj.controls[i])?.0))
        .collect::<Result<Vec<_>>>()?;
    ObservabilitySequence::new(h, f)
}

/// The filter's linearised system: `H_i` at its linearization point for step
/// `i`, `F_i` between `X_{i|i}` and `X_{i+1|i}`.
pub fn ekf_sequence(config: &VariantConfig, traj: &NoisyTrajectory) -> Result<ObservabilitySequence> {
    let n = traj.truth.len();
    let mut h = Vec::with_capacity(n);
    let mut f = Vec::with_capacity(n - 1);
    for i in 0..n {
        let (h_lin, f_lin) = match config.policy {
            Policy::Estimate => (Linearization::Estimate, Linearization::Estimate),
            Policy::Truth => {
                let next = traj.truth.get(i + 1).unwrap_or(&traj.truth[i]).clone();
                (
                    Linearization::Truth { prev: traj.truth[i].clone(), current: traj.truth[i].clone() },
                    Linearization::Truth { prev: traj.truth[i].clone(), current: next },
                )
            }
            Policy::FirstEstimates => {
                let p = &traj.predicted[i];
                let lin = Linearization::FirstEstimates {
                    prev_pred_position: p.position,
                    pose: Some((p.rotation, p.position)),
                    landmarks: traj.first_landmarks.clone(),
                };
                (lin.clone(), lin)
            }
        };
        h.push(stacked_h(&SlamFilter::new(config, h_lin), &traj.predicted[i])?);
        if i + 1 < n {
            let filter = SlamFilter::new(config, f_lin);
            f.push(filter.process_jacobians(&traj.updated[i], &traj.predicted[i + 1], &traj.controls[i])?.0);
        }
    }
    ObservabilitySequence::new(h, f)
}

/// Standard-atlas true nullspace expressed in a chart: `A_X N(X)`.
pub fn chart_true_nullspace(config: &VariantConfig, x: &SlamState) -> Result<SubspaceBasis> {
    let n = true_nullspace_matrix(&config.model, x)?;
    Ok(SubspaceBasis::from_columns(&(config.chart.affine_matrix(x)? * n), RANK_TOL))
}

/// Audit summary for one variant of one application.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub app: String,
    pub variant: FilterVariant,
    pub dim_true: usize,
    pub dim_ekf_min: usize,
    pub dim_ekf_max: usize,
    /// Every sampled trajectory satisfies the observability constraint.
    pub constraint: bool,
    /// The true unobservable subspace is constant in the variant's chart.
    pub constant: bool,
    pub condition_i: bool,
    pub condition_ii: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct AuditSettings {
    pub trajectories: usize,
    pub order: usize,
    pub sigma: f64,
    pub scale: f64,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self { trajectories: 20, order: 3, sigma: 0.05, scale: 4.0, seed: 1, exec: Execution::default() }
    }
}

fn sample_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng
}

/// Sampled trajectories shared by every variant of one application.
pub fn sample_trajectories(model: &AppModel, settings: &AuditSettings) -> Result<Vec<NoisyTrajectory>> {
    exec::map_indexed(settings.trajectories, settings.exec, |i| {
        random_trajectory(model, settings.order + 1, settings.scale, settings.sigma, &mut sample_rng(settings.seed, i))
    })
    .into_iter()
    .collect()
}

pub fn audit_variant(
    model: &AppModel,
    variant: FilterVariant,
    trajectories: &[NoisyTrajectory],
    settings: &AuditSettings,
) -> Result<AuditRow> {
    let config = make_variant(model, variant)?;
    let k = settings.order;
    let reports = exec::map_slice(trajectories, settings.exec, |t| {
        check_observability_constraint(&truth_sequence(&config, t)?, &ekf_sequence(&config, t)?, k, RANK_TOL)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let dim_true = reports.iter().map(|r| r.dim_true[k]).max().unwrap_or(0);
    let ekf_dims: Vec<usize> = reports.iter().map(|r| r.dim_ekf[k]).collect();
    let truths = trajectories.iter().map(|t| truth_sequence(&config, t)).collect::<Result<Vec<_>>>()?;
    let constancy = check_constant_nullspace(&truths, k)?;

    let states: Vec<SlamState> = trajectories.iter().map(|t| t.truth[0].clone()).collect();
    let pairs: Vec<(SlamState, SlamState)> = trajectories.iter().map(|t| (t.truth[1].clone(), t.truth[0].clone())).collect();
    let filter = SlamFilter::new(&config, Linearization::Estimate);
    let h_at = |x: &SlamState| stacked_h(&filter, x).unwrap_or_else(|_| DMatrix::zeros(0, x.dim()));
    let f_between = |x1: &SlamState, x0: &SlamState| {
        filter.process_jacobians(x0, x1, &Odometry::between(x0, x1)).map(|(f, _)| f).unwrap_or_else(|_| DMatrix::zeros(x0.dim(), x0.dim()))
    };
    let cond_i = check_condition_i(h_at, &states);
    let cond_ii = check_condition_ii(h_at, f_between, &pairs);

    let mut witness = None;
    if let Some((a, b)) = constancy.witness {
        witness = Some(format!("nullspace differs between trajectories {a} and {b}"));
    } else if let Some(i) = reports.iter().position(|r| !r.satisfied) {
        witness = Some(format!("trajectory {i}: true dims {:?}, filter dims {:?}", reports[i].dim_true, reports[i].dim_ekf));
    }
    Ok(AuditRow {
        app: model.name().to_string(),
        variant,
        dim_true,
        dim_ekf_min: ekf_dims.iter().copied().min().unwrap_or(0),
        dim_ekf_max: ekf_dims.iter().copied().max().unwrap_or(0),
        constraint: reports.iter().all(|r| r.satisfied),
        constant: constancy.constant,
        condition_i: cond_i.holds,
        condition_ii: cond_ii.holds,
        witness,
    })
}

pub fn audit_model(model: &AppModel, variants: &[FilterVariant], settings: &AuditSettings) -> Result<Vec<AuditRow>> {
    let trajectories = sample_trajectories(model, settings)?;
    variants.iter().map(|v| audit_variant(model, *v, &trajectories, settings)).collect()
}

pub fn format_audit(rows: &[AuditRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<11} {:<7} {:>8} {:>9} {:>10} {:>8} {:>6} {:>7}", "app", "variant", "dim_true", "dim_ekf", "constraint", "constant", "cond_i", "cond_ii");
    for r in rows {
        let ekf = if r.dim_ekf_min == r.dim_ekf_max { r.dim_ekf_min.to_string() } else { format!("{}..{}", r.dim_ekf_min, r.dim_ekf_max) };
        let _ = writeln!(
            out,
            "{:<11} {:<7} {:>8} {:>9} {:>10} {:>8} {:>6} {:>7}",
            r.app, r.variant.name(), r.dim_true, ekf, r.constraint, r.constant, r.condition_i, r.condition_ii
        );
        if let Some(w) = &r.witness {
            let _ = writeln!(out, "  witness: {w}");
        }
    }
    out
}

/// Nullspace of the order-`k` observability matrix of a sequence.
pub fn sequence_nullspace(seq: &ObservabilitySequence, k: usize) -> Result<SubspaceBasis> {
    Ok(nullspace_basis(&observability_matrix(&seq.truncated(k))?, RANK_TOL))
}
