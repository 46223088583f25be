//! Checks shared by the integration tests and the acceptance report.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::time::Instant;

use affine_ekf::apps::audit::{audit_model, chart_true_nullspace, random_trajectory, sequence_nullspace, truth_sequence, AuditRow, AuditSettings};
use affine_ekf::apps::{
    make_cp_model, make_plane_model, make_point_model, make_variant, random_odometry, random_state, AppKind, AppModel, Chart,
    FilterVariant, HeightMode, Linearization, SlamFilter, SlamState,
};
use affine_ekf::atlas::numeric_jacobians;
use affine_ekf::ekf::{propagate, update, FilterModel, GaussianBelief, NoiseSpec};
use affine_ekf::observability::{check_lemma_affine_nullspace, check_lemma_rank, preserves_subspace, RANK_TOL};
use affine_ekf::sim::equivalence::equivalence_run;
use affine_ekf::sim::metrics::{mean, nees};
use affine_ekf::sim::{generate_environment, simulate_measurements, EnvironmentSpec};
use affine_ekf::Result;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const CP_HEIGHT: f64 = -1.2;

#[derive(Debug)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    fn from_failures(failures: Vec<String>, summary: String) -> Self {
        if failures.is_empty() {
            Verdict { pass: true, detail: summary }
        } else {
            Verdict { pass: false, detail: format!("{summary}; {}", failures.join("; ")) }
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// Models used by the structural checks: one point feature, three of the others.
pub fn audit_models() -> Vec<AppModel> {
    vec![
        make_point_model(1),
        make_cp_model(3, HeightMode::Known(CP_HEIGHT)),
        make_cp_model(3, HeightMode::Unknown),
        make_plane_model(3),
    ]
}

fn row<'a>(rows: &'a [AuditRow], v: FilterVariant) -> &'a AuditRow {
    rows.iter().find(|r| r.variant == v).expect("variant audited")
}

pub fn point_dimensions() -> Result<Verdict> {
    let start = Instant::now();
    let rows = audit_model(&make_point_model(1), &FilterVariant::supported(AppKind::Point), &AuditSettings::default())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut fails = Vec::new();
    for r in &rows {
        if r.dim_true != 6 {
            fails.push(format!("{} true dim {}", r.variant, r.dim_true));
        }
    }
    let std = row(&rows, FilterVariant::Std);
    if (std.dim_ekf_min, std.dim_ekf_max) != (3, 3) {
        fails.push(format!("std filter dims {}..{}", std.dim_ekf_min, std.dim_ekf_max));
    }
    for v in [FilterVariant::AffV1, FilterVariant::AffV2, FilterVariant::Ri] {
        let r = row(&rows, v);
        if (r.dim_ekf_min, r.dim_ekf_max) != (6, 6) || !r.constant || !r.constraint {
            fails.push(format!("{v}: dims {}..{}, constant {}, constraint {}", r.dim_ekf_min, r.dim_ekf_max, r.constant, r.constraint));
        }
    }
    if elapsed >= 1.0 {
        fails.push(format!("runtime {elapsed:.2} s"));
    }
    Ok(Verdict::from_failures(fails, format!("true 6, std {}, aff_v1/aff_v2/ri 6 constant, {elapsed:.3} s", std.dim_ekf_max)))
}

pub fn app_dimensions() -> Result<Verdict> {
    let start = Instant::now();
    let cases = [
        (make_cp_model(3, HeightMode::Known(CP_HEIGHT)), 3),
        (make_cp_model(3, HeightMode::Unknown), 4),
        (make_plane_model(3), 6),
    ];
    let mut fails = Vec::new();
    let mut summary = Vec::new();
    for (model, expected) in cases {
        let rows = audit_model(&model, &[FilterVariant::Std, FilterVariant::Aff], &AuditSettings::default())?;
        let (std, aff) = (row(&rows, FilterVariant::Std), row(&rows, FilterVariant::Aff));
        summary.push(format!("{} true {} std {} aff {}", model.name(), aff.dim_true, std.dim_ekf_max, aff.dim_ekf_max));
        if std.dim_true != expected || aff.dim_true != expected {
            fails.push(format!("{} true dim {} (expected {expected})", model.name(), aff.dim_true));
        }
        if std.dim_ekf_max >= expected {
            fails.push(format!("{} std dim {} not below {expected}", model.name(), std.dim_ekf_max));
        }
        if (aff.dim_ekf_min, aff.dim_ekf_max) != (expected, expected) || !aff.constant {
            fails.push(format!("{} aff dims {}..{} constant {}", model.name(), aff.dim_ekf_min, aff.dim_ekf_max, aff.constant));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if elapsed >= 10.0 {
        fails.push(format!("runtime {elapsed:.2} s"));
    }
    summary.push(format!("{elapsed:.3} s"));
    Ok(Verdict::from_failures(fails, summary.join(", ")))
}

/// Variants with their own chart on the unmodified application model.
fn chart_variants(model: &AppModel) -> Vec<FilterVariant> {
    FilterVariant::supported(model.kind)
        .into_iter()
        .filter(|v| matches!(make_variant(model, *v), Ok(c) if c.model == *model && !matches!(c.chart, Chart::Standard)))
        .collect()
}

pub fn lemma_suite() -> Result<Verdict> {
    let mut fails = Vec::new();
    let mut checked = 0;
    for (mi, model) in audit_models().into_iter().enumerate() {
        let std = make_variant(&model, FilterVariant::Std)?;
        let mut r = rng(100 + mi as u64);
        for v in chart_variants(&model) {
            let cfg = make_variant(&model, v)?;
            for s in 0..20 {
                let traj = random_trajectory(&model, 4, 4.0, 0.0, &mut r)?;
                let eta = truth_sequence(&std, &traj)?;
                let xi = truth_sequence(&cfg, &traj)?;
                if !check_lemma_rank(&eta, &xi, 3, RANK_TOL)? {
                    fails.push(format!("{} {v} sample {s}: rank", model.name()));
                }
                let a = cfg.chart.affine_matrix(&traj.truth[0])?;
                if !check_lemma_affine_nullspace(&a, &sequence_nullspace(&eta, 3)?, &sequence_nullspace(&xi, 3)?) {
                    fails.push(format!("{} {v} sample {s}: nullspace", model.name()));
                }
                checked += 1;
            }
            let filter = SlamFilter::new(&cfg, Linearization::Estimate);
            for s in 0..100 {
                let prev = random_state(&model, model.features, 4.0, &mut r);
                let u = random_odometry(&mut r);
                let pred = filter.predict(&prev, &u)?;
                let (f, _) = filter.process_jacobians(&prev, &pred, &u)?;
                if !preserves_subspace(&f, &chart_true_nullspace(&cfg, &prev)?) {
                    fails.push(format!("{} {v} sample {s}: F does not preserve the nullspace", model.name()));
                }
            }
        }
    }
    Ok(Verdict::from_failures(fails, format!("{checked} atlas pairs checked, 100 propagation samples per atlas")))
}

pub fn jacobian_validation() -> Result<Verdict> {
    let models = [make_point_model(2), make_cp_model(3, HeightMode::Known(CP_HEIGHT)), make_cp_model(3, HeightMode::Unknown), make_plane_model(2)];
    let mut worst: f64 = 0.0;
    let mut fails = Vec::new();
    let mut r = rng(31);
    for model in models {
        for v in [FilterVariant::Std, FilterVariant::Ri, FilterVariant::AffV1, FilterVariant::AffV2, FilterVariant::Aff] {
            let Ok(cfg) = make_variant(&model, v) else { continue };
            if cfg.model != model {
                continue;
            }
            let filter = SlamFilter::new(&cfg, Linearization::Estimate);
            for _ in 0..100 {
                let prev = random_state(&model, model.features, 4.0, &mut r);
                let u = random_odometry(&mut r);
                let pred = filter.predict(&prev, &u)?;
                let j = r.random_range(0..model.features);
                let num = numeric_jacobians(
                    &cfg.chart,
                    |x: &SlamState, w: &DVector<f64>| Ok(model.process(x, &u.perturbed(w))),
                    |x: &SlamState| model.observe(x, j).map(|z| DVector::from_column_slice(z.as_slice())),
                    &prev,
                    &pred,
                    6,
                )?;
                let (f, g) = filter.process_jacobians(&prev, &pred, &u)?;
                let h = filter.observation_jacobian(&pred, j)?;
                for (name, a, b) in [("F", &f, &num.f), ("G", &g, &num.g), ("H", &h, &num.h)] {
                    let e = rel(a, b);
                    worst = worst.max(e);
                    if e > 1e-5 {
                        fails.push(format!("{} {v} {name}: {e:.2e}", model.name()));
                    }
                }
            }
        }
    }
    Ok(Verdict::from_failures(fails, format!("worst relative difference {worst:.2e}")))
}

pub fn equivalence(steps: usize) -> Result<Verdict> {
    let noise = NoiseSpec::new(0.003, 0.01, 0.1)?;
    let (mut state, mut cov): (f64, f64) = (0.0, 0.0);
    let mut fails = Vec::new();
    for env_seed in 1..=3 {
        let world = generate_environment(&EnvironmentSpec { steps, seed: env_seed, ..EnvironmentSpec::desk(AppKind::Point) })?;
        for (k, v) in [FilterVariant::AffV1, FilterVariant::AffV2].into_iter().enumerate() {
            let meas = simulate_measurements(&world, &noise.into(), 1000 * env_seed + k as u64);
            let r = equivalence_run(&world, &meas, &noise, v)?;
            state = state.max(r.max_state_diff);
            cov = cov.max(r.max_cov_rel);
        }
    }
    if state >= 1e-9 {
        fails.push(format!("state difference {state:.2e}"));
    }
    if cov >= 1e-8 {
        fails.push(format!("covariance relation {cov:.2e}"));
    }
    Ok(Verdict::from_failures(fails, format!("max state diff {state:.2e}, max covariance relative error {cov:.2e}")))
}

/// Constant-velocity model on the line; the filter's model is exact.
struct ConstantVelocity {
    dt: f64,
}

impl ConstantVelocity {
    fn f(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, self.dt, 0.0, 1.0])
    }
}

impl FilterModel<DVector<f64>> for ConstantVelocity {
    type Control = ();

    fn error(&self, center: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(x - center)
    }

    fn retract(&self, center: &DVector<f64>, eps: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(center + eps)
    }

    fn predict(&self, x: &DVector<f64>, _u: &()) -> Result<DVector<f64>> {
        Ok(self.f() * x)
    }

    fn process_jacobians(&self, _prev: &DVector<f64>, _pred: &DVector<f64>, _u: &()) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        Ok((self.f(), DMatrix::identity(2, 2)))
    }

    fn observe(&self, x: &DVector<f64>, _index: usize) -> Result<DVector<f64>> {
        Ok(DVector::from_element(1, x[0]))
    }

    fn observation_jacobian(&self, _x: &DVector<f64>, _index: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]))
    }
}

pub fn nees_calibration(samples: usize) -> Result<Verdict> {
    let model = ConstantVelocity { dt: 0.1 };
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1e-4, 4e-4]));
    let q_sqrt = q.map(f64::sqrt);
    let omega = DMatrix::from_element(1, 1, 0.05f64.powi(2));
    let mut r = rng(77);
    let mut truth = DVector::from_vec(vec![0.0, 1.0]);
    let mut belief = GaussianBelief::new(truth.clone(), DMatrix::identity(2, 2) * 1e-4)?;
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let w = DVector::from_fn(2, |_, _| r.sample::<f64, _>(StandardNormal));
        truth = model.f() * &truth + &q_sqrt * w;
        belief = propagate(&model, &belief, &(), &q)?;
        let z = DVector::from_element(1, truth[0] + 0.05 * r.sample::<f64, _>(StandardNormal));
        belief = update(&model, &belief, 0, &z, &omega)?;
        values.push(nees(&(&truth - &belief.state), &belief.cov, 2)?);
    }
    let m = mean(&values);
    let pass = (0.95..=1.05).contains(&m);
    Ok(Verdict { pass, detail: format!("mean NEES {m:.4} over {samples} samples") })
}

pub fn describe(name: &str, v: &Verdict) -> String {
    let mut s = String::new();
    let _ = write!(s, "{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    s
}
