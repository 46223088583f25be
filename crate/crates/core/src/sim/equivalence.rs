//! Dual run of an affine-atlas filter and the standard-atlas filter with
//! covariance correction, on the same measurements.

use nalgebra::{DMatrix, DVector};

use super::env::World;
use super::measure::Measurements;
use crate::apps::{augment_feature, make_variant, Chart, FilterVariant, Linearization, SlamFilter, SlamState, StandardChart};
use crate::atlas::{transform_covariance, AffineMap, Atlas};
use crate::ekf::{alt_affine_update, propagate, update, GaussianBelief, NoiseSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub steps: usize,
    /// Largest standard-atlas distance between the two state estimates.
    pub max_state_diff: f64,
    /// Largest `‖P^ξ − A P̃ Aᵀ‖ / ‖P^ξ‖` over steps.
    pub max_cov_rel: f64,
}

fn relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(f64::MIN_POSITIVE)
}

/// Runs `variant` (an affine-atlas variant) both ways and reports the largest
/// disagreement after every step.
pub fn equivalence_run(
    world: &World,
    meas: &Measurements,
    noise: &NoiseSpec,
    variant: FilterVariant,
) -> Result<EquivalenceReport> {
    let model = world.spec.model();
    let aff_cfg = make_variant(&model, variant)?;
    let Chart::Affine(affine) = aff_cfg.chart else {
        return Err(Error::VariantUnsupported { variant: variant.name().into(), app: "equivalence check".into() });
    };
    let std_cfg = make_variant(&model, FilterVariant::Std)?;
    let aff = SlamFilter::new(&aff_cfg, Linearization::Estimate);
    let std = SlamFilter::new(&std_cfg, Linearization::Estimate);
    let sigma = noise.control_cov();
    let omega = noise.observation_cov(3);

    let pose = &world.poses[0];
    let start = GaussianBelief { state: SlamState::new(pose.rotation, pose.position, DVector::zeros(0)), cov: DMatrix::zeros(6, 6) };
    let (mut xi, mut eta) = (start.clone(), start);
    let mut slot_of = vec![None; world.features.len()];
    let mut count = 0;
    for (j, z) in &meas.observations[0] {
        xi = augment_feature(&aff_cfg, &xi, z, &omega)?;
        eta = augment_feature(&std_cfg, &eta, z, &omega)?;
        slot_of[*j] = Some(count);
        count += 1;
    }

    let mut report = EquivalenceReport { steps: meas.odometry.len(), max_state_diff: 0.0, max_cov_rel: 0.0 };
    for n in 1..=meas.odometry.len() {
        let u = &meas.odometry[n - 1];
        xi = propagate(&aff, &xi, u, &sigma)?;
        eta = propagate(&std, &eta, u, &sigma)?;
        let mut fresh = Vec::new();
        for (j, z) in &meas.observations[n] {
            match slot_of[*j] {
                Some(s) => {
                    let zz = DVector::from_column_slice(z.as_slice());
                    xi = update(&aff, &xi, s, &zz, &omega)?;
                    eta = alt_affine_update(&std, &affine, &eta, s, &zz, &omega)?;
                }
                None => fresh.push((*j, *z)),
            }
        }
        for (j, z) in fresh {
            xi = augment_feature(&aff_cfg, &xi, &z, &omega)?;
            eta = augment_feature(&std_cfg, &eta, &z, &omega)?;
            slot_of[j] = Some(count);
            count += 1;
        }
        let diff = StandardChart.error(&eta.state, &xi.state)?.norm();
        let rel = relative(&xi.cov, &transform_covariance(&eta.cov, &affine.matrix(&xi.state)?));
        report.max_state_diff = report.max_state_diff.max(diff);
        report.max_cov_rel = report.max_cov_rel.max(rel);
    }
    Ok(report)
}
