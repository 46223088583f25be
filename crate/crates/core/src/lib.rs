//! Affine-atlas extended Kalman filtering for SLAM.
//!
//! The crate is organised bottom-up:
//!
//! * [`liegroups`]: SO(d) and SE_{K+1}(d) primitives.
//! * [`atlas`]: charts, affine atlases and Jacobians expressed in a chart.
//! * [`ekf`]: the generic filter, its affine covariance-correction variant and feature augmentation.
//! * [`observability`]: observability matrices, nullspaces and the numeric consistency checkers.
//! * [`apps`]: point, constrained-point and plane SLAM models with their filter variants.
//! * [`sim`]: environments, measurement simulation, metrics, Monte Carlo aggregation and CSV output.
//! * [`cli`]: the `affekf` command line front end.

pub mod apps;
pub mod atlas;
pub mod cli;
pub mod ekf;
pub mod error;
pub mod exec;
pub mod liegroups;
pub mod observability;
pub mod sim;

pub use error::{Error, Result};
