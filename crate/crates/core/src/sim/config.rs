//! TOML run configuration.
//!
//! ```toml
//! [env]
//! app = "point"            # point | cp_known | cp_unknown | plane
//! preset = "desk"          # desk | wide; supplies any geometry field left out
//! features = 20
//! height = -1.2            # feature height for cp_known
//! radius = 12.5
//! steps = 600
//! step_length = 0.25
//! visibility_radius = 5.0
//! seed = 11
//!
//! [noise]
//! sigma_w1 = 0.003
//! sigma_w2 = 0.01
//! sigma_v = 0.1
//!
//! [run]
//! variants = ["std", "aff_v1"]   # default: every variant the app supports
//! runs = 50
//! seed = 7
//! init = "first_observation"     # or "prior_map"
//! prior_sigma = 0.1
//! timing = true
//! out = "out"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::env::EnvironmentSpec;
use super::montecarlo::MonteCarloConfig;
use super::run::InitMode;
use crate::apps::{AppKind, FilterVariant, HeightMode};
use crate::ekf::NoiseSpec;
use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    env: RawEnv,
    #[serde(default)]
    noise: RawNoise,
    #[serde(default)]
    run: RawRun,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEnv {
    app: String,
    preset: String,
    features: Option<usize>,
    height: f64,
    radius: Option<f64>,
    steps: Option<usize>,
    step_length: Option<f64>,
    visibility_radius: Option<f64>,
    seed: u64,
}

impl Default for RawEnv {
    fn default() -> Self {
        Self {
            app: "point".into(),
            preset: "desk".into(),
            features: None,
            height: -1.2,
            radius: None,
            steps: None,
            step_length: None,
            visibility_radius: None,
            seed: 11,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNoise {
    sigma_w1: f64,
    sigma_w2: f64,
    sigma_v: f64,
}

impl Default for RawNoise {
    fn default() -> Self {
        Self { sigma_w1: 0.003, sigma_w2: 0.01, sigma_v: 0.1 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum VariantList {
    Csv(String),
    List(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRun {
    variants: Option<VariantList>,
    runs: usize,
    seed: u64,
    init: String,
    prior_sigma: f64,
    timing: bool,
    out: Option<PathBuf>,
}

impl Default for RawRun {
    fn default() -> Self {
        Self { variants: None, runs: 50, seed: 7, init: "first_observation".into(), prior_sigma: 0.1, timing: true, out: None }
    }
}

/// A parsed configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub montecarlo: MonteCarloConfig,
    pub out: Option<PathBuf>,
}

fn field_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

pub fn parse_app(name: &str, height: f64) -> Result<AppKind> {
    match name {
        "point" => Ok(AppKind::Point),
        "cp_known" => Ok(AppKind::ConstrainedPoint(HeightMode::Known(height))),
        "cp_unknown" => Ok(AppKind::ConstrainedPoint(HeightMode::Unknown)),
        "plane" => Ok(AppKind::Plane),
        other => Err(field_error("env.app", format!("unknown application '{other}' (expected point, cp_known, cp_unknown or plane)"))),
    }
}

/// Parses a comma separated variant list.
pub fn parse_variants(items: &[String]) -> Result<Vec<FilterVariant>> {
    if items.is_empty() {
        return Err(field_error("run.variants", "empty variant list"));
    }
    items
        .iter()
        .map(|s| s.parse::<FilterVariant>().map_err(|e| match e {
            Error::Config { message, .. } => field_error("run.variants", message),
            other => other,
        }))
        .collect()
}

pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(String::from).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" at byte {}", s.start)).unwrap_or_default();
            field_error("config", format!("{}{span}", e.message()))
        })?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| field_error("config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let app = parse_app(&raw.env.app, raw.env.height)?;
        let base = match raw.env.preset.as_str() {
            "desk" => EnvironmentSpec::desk(app),
            "wide" => EnvironmentSpec::wide(app),
            other => return Err(field_error("env.preset", format!("unknown preset '{other}' (desk, wide)"))),
        };
        let env = EnvironmentSpec {
            app,
            feature_count: raw.env.features.unwrap_or(base.feature_count),
            radius: raw.env.radius.unwrap_or(base.radius),
            steps: raw.env.steps.unwrap_or(base.steps),
            step_length: raw.env.step_length.unwrap_or(base.step_length),
            visibility_radius: raw.env.visibility_radius.unwrap_or(base.visibility_radius),
            seed: raw.env.seed,
        };
        env.validate()?;
        let noise = NoiseSpec::new(raw.noise.sigma_w1, raw.noise.sigma_w2, raw.noise.sigma_v).map_err(|e| match e {
            Error::Config { field, message } => field_error(&format!("noise.{field}"), message),
            other => other,
        })?;
        let variants = match raw.run.variants {
            None => FilterVariant::supported(app),
            Some(VariantList::Csv(s)) => parse_variants(&split_list(&s))?,
            Some(VariantList::List(v)) => parse_variants(&v)?,
        };
        if raw.run.runs < 1 {
            return Err(field_error("run.runs", "at least one run is required"));
        }
        let init = match raw.run.init.as_str() {
            "first_observation" => InitMode::FirstObservation,
            "prior_map" if raw.run.prior_sigma > 0.0 => InitMode::PriorMap { sigma: raw.run.prior_sigma },
            "prior_map" => return Err(field_error("run.prior_sigma", "must be positive")),
            other => return Err(field_error("run.init", format!("unknown mode '{other}'"))),
        };
        let montecarlo = MonteCarloConfig {
            env,
            noise,
            variants,
            runs: raw.run.runs,
            seed: raw.run.seed,
            init,
            timing: raw.run.timing,
            exec: Execution::default(),
        };
        Ok(Self { montecarlo, out: raw.run.out })
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_raw(RawConfig::default()).expect("defaults are valid")
    }
}
