//! Ground-truth environments: a wobbling circular trajectory and features
//! placed so that every pose observes something.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::apps::{AppKind, AppModel, HeightMode, Odometry, SlamState};
use crate::error::{Error, Result};
use crate::liegroups::so3_exp;

/// Closest distance a plane observation must keep from the robot.
pub const PLANE_MIN_RANGE: f64 = 0.3;
const PLACEMENT_RETRIES: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvironmentSpec {
    pub app: AppKind,
    pub feature_count: usize,
    pub radius: f64,
    pub steps: usize,
    pub step_length: f64,
    pub visibility_radius: f64,
    pub seed: u64,
}

impl EnvironmentSpec {
    /// Desk-scale defaults for an application.
    pub fn desk(app: AppKind) -> Self {
        let feature_count = if app == AppKind::Plane { 8 } else { 20 };
        Self { app, feature_count, radius: 12.5, steps: 600, step_length: 0.25, visibility_radius: 5.0, seed: 11 }
    }

    /// Longer runs with larger steps, where a filter that gains spurious
    /// information over many updates drifts visibly from NEES 1.
    pub fn wide(app: AppKind) -> Self {
        match app {
            AppKind::Point => Self { app, feature_count: 50, radius: 12.0, steps: 1972, step_length: 0.24, visibility_radius: 5.0, seed: 11 },
            AppKind::ConstrainedPoint(_) => {
                Self { app, feature_count: 40, radius: 30.32, steps: 1000, step_length: 0.94, visibility_radius: 5.0, seed: 11 }
            }
            AppKind::Plane => Self { app, feature_count: 10, radius: 15.0, steps: 1966, step_length: 0.24, visibility_radius: 3.25, seed: 11 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Err(Error::Config { field: format!("env.{field}"), message });
        if self.feature_count < 1 {
            return bad("features", "at least one feature is required".into());
        }
        if self.app == AppKind::Plane && self.feature_count < 2 {
            return bad("features", "plane worlds need a floor and a ceiling".into());
        }
        if self.steps < 2 {
            return bad("steps", format!("{} steps, at least 2 required", self.steps));
        }
        if !(self.visibility_radius > 0.0) {
            return bad("visibility_radius", format!("{} is not positive", self.visibility_radius));
        }
        if !(self.radius > 0.0) || !(self.step_length > 0.0) {
            return bad("radius", "radius and step_length must be positive".into());
        }
        if self.step_length / self.radius > 0.5 {
            return bad("step_length", "turn per step exceeds 0.5 rad".into());
        }
        Ok(())
    }

    /// Heading change per step.
    pub fn turn_per_step(&self) -> f64 {
        self.step_length / self.radius
    }

    pub fn model(&self) -> AppModel {
        AppModel { kind: self.app, features: self.feature_count }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub spec: EnvironmentSpec,
    /// `steps + 1` robot poses, without landmarks.
    pub poses: Vec<SlamState>,
    /// World points, or closest-point vectors `d·n` for planes.
    pub features: Vec<Vector3<f64>>,
}

impl World {
    pub fn odometry(&self, step: usize) -> Odometry {
        Odometry::between(&self.poses[step - 1], &self.poses[step])
    }

    /// Features visible from pose `i`, in index order.
    pub fn visible(&self, i: usize) -> Vec<usize> {
        let pose = &self.poses[i];
        (0..self.features.len()).filter(|&j| is_visible(&self.spec, pose, &self.features[j])).collect()
    }

    /// Mean robot-to-feature distance over all observations.
    pub fn mean_observation_distance(&self) -> f64 {
        let (mut sum, mut n) = (0.0, 0usize);
        for i in 0..self.poses.len() {
            for j in self.visible(i) {
                sum += range(&self.spec, &self.poses[i], &self.features[j]);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

fn range(spec: &EnvironmentSpec, pose: &SlamState, f: &Vector3<f64>) -> f64 {
    match spec.app {
        AppKind::Plane => {
            let d = f.norm();
            d - pose.position.dot(&(f / d))
        }
        _ => (f - pose.position).norm(),
    }
}

fn is_visible(spec: &EnvironmentSpec, pose: &SlamState, f: &Vector3<f64>) -> bool {
    let r = range(spec, pose, f);
    match spec.app {
        AppKind::Plane => r.abs() >= PLANE_MIN_RANGE && r.abs() <= spec.visibility_radius,
        _ => r <= spec.visibility_radius,
    }
}

fn trajectory(spec: &EnvironmentSpec) -> Vec<SlamState> {
    let w = spec.turn_per_step();
    (0..=spec.steps)
        .map(|i| {
            let t = i as f64;
            let yaw = w * t;
            let roll = 0.02 * (0.11 * t).sin();
            let pitch = 0.015 * (0.07 * t).sin();
            let rotation: Matrix3<f64> = so3_exp(&Vector3::new(0.0, 0.0, yaw)) * so3_exp(&Vector3::new(roll, pitch, 0.0));
            let position = Vector3::new(spec.radius * yaw.sin(), spec.radius * (1.0 - yaw.cos()), 0.1 * (0.05 * t).sin());
            SlamState::new(rotation, position, DVector::zeros(0))
        })
        .collect()
}

fn place_points<R: Rng>(spec: &EnvironmentSpec, rng: &mut R) -> Vec<Vector3<f64>> {
    let k = spec.feature_count;
    let centre = Vector3::new(0.0, spec.radius, 0.0);
    (0..k)
        .map(|j| {
            let angle = 2.0 * PI * (j as f64 + rng.random_range(-0.4..0.4)) / k as f64;
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let r = spec.radius + side * rng.random_range(1.5..3.5);
            let z = match spec.app {
                AppKind::ConstrainedPoint(HeightMode::Known(c)) => c,
                AppKind::ConstrainedPoint(HeightMode::Unknown) => CP_UNKNOWN_HEIGHT,
                _ => rng.random_range(-1.0..1.5),
            };
            // Angle measured from the circle centre, starting below it at the origin.
            centre + Vector3::new(r * angle.sin(), -r * angle.cos(), z)
        })
        .collect()
}

/// Feature height used when the filter has to estimate it.
pub const CP_UNKNOWN_HEIGHT: f64 = -1.2;

fn place_planes<R: Rng>(spec: &EnvironmentSpec, rng: &mut R) -> Vec<Vector3<f64>> {
    let centre = Vector3::new(0.0, spec.radius, 0.0);
    let mut planes = vec![Vector3::new(0.0, 0.0, -1.5), Vector3::new(0.0, 0.0, 2.5)];
    let walls = spec.feature_count - 2;
    for j in 0..walls {
        let phi = 2.0 * PI * (j as f64 + rng.random_range(-0.2..0.2)) / walls.max(1) as f64;
        let n = Vector3::new(phi.sin(), -phi.cos(), 0.0);
        let d = spec.radius + 2.0 + rng.random_range(0.0..1.0) + n.dot(&centre);
        planes.push(n * d);
    }
    planes
}

/// Deterministic under `spec.seed`. Retries feature placement until every
/// pose sees at least one feature.
pub fn generate_environment(spec: &EnvironmentSpec) -> Result<World> {
    spec.validate()?;
    let poses = trajectory(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..PLACEMENT_RETRIES {
        let features = match spec.app {
            AppKind::Plane => place_planes(spec, &mut rng),
            _ => place_points(spec, &mut rng),
        };
        let world = World { spec: spec.clone(), poses: poses.clone(), features };
        if (0..world.poses.len()).all(|i| !world.visible(i).is_empty()) {
            return Ok(world);
        }
    }
    Err(Error::InfeasibleSpec(format!(
        "no placement of {} features leaves every pose with a visible feature within {} m",
        spec.feature_count, spec.visibility_radius
    )))
}
