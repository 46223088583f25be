//! Noisy odometry and feature observations along a world trajectory.

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::env::World;
use crate::apps::{AppKind, Odometry};
use crate::ekf::NoiseSpec;
use crate::error::{Error, Result};

/// Simulation noise; unlike [`NoiseSpec`] zero is allowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorNoise {
    pub sigma_w1: f64,
    pub sigma_w2: f64,
    pub sigma_v: f64,
}

impl SensorNoise {
    pub const ZERO: SensorNoise = SensorNoise { sigma_w1: 0.0, sigma_w2: 0.0, sigma_v: 0.0 };

    pub fn new(sigma_w1: f64, sigma_w2: f64, sigma_v: f64) -> Result<Self> {
        for (name, v) in [("sigma_w1", sigma_w1), ("sigma_w2", sigma_w2), ("sigma_v", sigma_v)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config { field: format!("noise.{name}"), message: format!("{v} is not a non-negative number") });
            }
        }
        Ok(Self { sigma_w1, sigma_w2, sigma_v })
    }
}

impl From<NoiseSpec> for SensorNoise {
    fn from(n: NoiseSpec) -> Self {
        Self { sigma_w1: n.sigma_w1, sigma_w2: n.sigma_w2, sigma_v: n.sigma_v }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Measurements {
    /// Entry `n - 1` drives the robot from pose `n - 1` to pose `n`.
    pub odometry: Vec<Odometry>,
    /// Per pose (including the initial one): `(feature id, z)`.
    pub observations: Vec<Vec<(usize, Vector3<f64>)>>,
}

fn normal3<R: Rng>(rng: &mut R, sigma: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| sigma * rng.sample::<f64, _>(StandardNormal))
}

/// The noise-free observation of world feature `f` from `pose`.
pub fn ideal_observation(app: AppKind, pose: &crate::apps::SlamState, f: &Vector3<f64>) -> Vector3<f64> {
    let rt = pose.rotation.transpose();
    match app {
        AppKind::Plane => {
            let d = f.norm();
            let n = f / d;
            rt * n * (d - pose.position.dot(&n))
        }
        _ => rt * (f - pose.position),
    }
}

/// Deterministic under `seed`.
pub fn simulate_measurements(world: &World, noise: &SensorNoise, seed: u64) -> Measurements {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut odometry = Vec::with_capacity(world.poses.len() - 1);
    let mut observations = Vec::with_capacity(world.poses.len());
    for (i, pose) in world.poses.iter().enumerate() {
        if i > 0 {
            let w1 = normal3(&mut rng, noise.sigma_w1);
            let w2 = normal3(&mut rng, noise.sigma_w2);
            let w = DVector::from_iterator(6, w1.iter().chain(w2.iter()).copied());
            odometry.push(world.odometry(i).perturbed(&w));
        }
        let seen = world
            .visible(i)
            .into_iter()
            .map(|j| (j, ideal_observation(world.spec.app, pose, &world.features[j]) + normal3(&mut rng, noise.sigma_v)))
            .collect();
        observations.push(seen);
    }
    Measurements { odometry, observations }
}
