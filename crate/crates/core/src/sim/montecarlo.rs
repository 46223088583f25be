//! Monte Carlo aggregation across runs and variants.

use std::time::Instant;

use super::env::{generate_environment, EnvironmentSpec, World};
use super::measure::simulate_measurements;
use super::metrics::mean;
use super::run::{run_filter, InitMode, StepRecord};
use crate::apps::{make_variant, FilterVariant, VariantConfig};
use crate::ekf::NoiseSpec;
use crate::error::Result;
use crate::exec::{self, Execution};

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloConfig {
    pub env: EnvironmentSpec,
    pub noise: NoiseSpec,
    pub variants: Vec<FilterVariant>,
    pub runs: usize,
    pub seed: u64,
    pub init: InitMode,
    /// Record wall time; when false `time_s` is zero so output is reproducible.
    pub timing: bool,
    pub exec: Execution,
}

impl MonteCarloConfig {
    pub fn new(env: EnvironmentSpec, noise: NoiseSpec, runs: usize, seed: u64) -> Self {
        let variants = FilterVariant::supported(env.app);
        Self { env, noise, variants, runs, seed, init: InitMode::FirstObservation, timing: true, exec: Execution::default() }
    }
}

/// Seed of run `index`: a SplitMix64 output at counter position `index + 1`.
pub fn derive_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trajectory-averaged metrics of one variant.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantSummary {
    pub variant: FilterVariant,
    pub rmse_ori: f64,
    pub rmse_pos: f64,
    pub rmse_feat: f64,
    pub nees_pose: f64,
    pub nees_feat: f64,
    pub time_s: f64,
    pub runs_ok: usize,
}

/// Per-step aggregates plus the error and 3σ bound of run 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesRow {
    pub step: usize,
    pub rmse_ori: f64,
    pub rmse_pos: f64,
    pub nees_pose: f64,
    pub nees_feat: f64,
    pub err_ori: f64,
    pub err_pos: f64,
    pub bound3s_ori: f64,
    pub bound3s_pos: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariantSeries {
    pub variant: FilterVariant,
    pub rows: Vec<SeriesRow>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FailedRun {
    pub run: usize,
    pub variant: FilterVariant,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloReport {
    pub runs: usize,
    pub summaries: Vec<VariantSummary>,
    pub series: Vec<VariantSeries>,
    pub failures: Vec<FailedRun>,
}

impl MonteCarloReport {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn summary(&self, variant: FilterVariant) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == variant)
    }

    pub fn series_of(&self, variant: FilterVariant) -> Option<&VariantSeries> {
        self.series.iter().find(|s| s.variant == variant)
    }
}

type RunResult = std::result::Result<(Vec<StepRecord>, f64), String>;

fn aggregate_variant(variant: FilterVariant, steps: usize, runs: &[&RunResult], timing: bool) -> (VariantSummary, VariantSeries) {
    let ok: Vec<&Vec<StepRecord>> = runs.iter().filter_map(|r| r.as_ref().ok().map(|(rec, _)| rec)).collect();
    let n = ok.len() as f64;
    let run0 = runs.first().and_then(|r| r.as_ref().ok()).map(|(rec, _)| rec);
    let rows: Vec<SeriesRow> = (0..steps)
        .map(|i| {
            let rms = |f: &dyn Fn(&StepRecord) -> f64| (ok.iter().map(|r| f(&r[i]).powi(2)).sum::<f64>() / n).sqrt();
            let r0 = run0.map(|r| &r[i]);
            SeriesRow {
                step: i + 1,
                rmse_ori: rms(&|r| r.err_ori),
                rmse_pos: rms(&|r| r.err_pos),
                nees_pose: mean(&ok.iter().map(|r| r[i].nees_pose).collect::<Vec<_>>()),
                nees_feat: mean(&ok.iter().map(|r| r[i].nees_feat).collect::<Vec<_>>()),
                err_ori: r0.map_or(f64::NAN, |r| r.err_yaw),
                err_pos: r0.map_or(f64::NAN, |r| r.err_x),
                bound3s_ori: r0.map_or(f64::NAN, |r| r.bound3s_yaw),
                bound3s_pos: r0.map_or(f64::NAN, |r| r.bound3s_x),
            }
        })
        .collect();
    let feat_rmse: Vec<f64> = (0..steps)
        .map(|i| {
            let count: usize = ok.iter().map(|r| r[i].feat_count).sum();
            if count == 0 {
                f64::NAN
            } else {
                (ok.iter().map(|r| r[i].feat_sq_sum).sum::<f64>() / count as f64).sqrt()
            }
        })
        .collect();
    let col = |f: fn(&SeriesRow) -> f64| mean(&rows.iter().map(f).collect::<Vec<_>>());
    let time_s = if timing { runs.iter().filter_map(|r| r.as_ref().ok()).map(|(_, t)| t).sum() } else { 0.0 };
    let summary = VariantSummary {
        variant,
        rmse_ori: col(|r| r.rmse_ori),
        rmse_pos: col(|r| r.rmse_pos),
        rmse_feat: mean(&feat_rmse),
        nees_pose: col(|r| r.nees_pose),
        nees_feat: col(|r| r.nees_feat),
        time_s,
        runs_ok: ok.len(),
    };
    (summary, VariantSeries { variant, rows })
}

/// Runs every variant `config.runs` times on `world`. Runs are independent and
/// executed according to `config.exec`; the reduction is ordered by run index.
pub fn aggregate_monte_carlo(config: &MonteCarloConfig, world: &World) -> Result<MonteCarloReport> {
    let model = config.env.model();
    let variants: Vec<VariantConfig> = config.variants.iter().map(|v| make_variant(&model, *v)).collect::<Result<_>>()?;
    let steps = world.poses.len() - 1;
    let per_run: Vec<Vec<RunResult>> = exec::map_indexed(config.runs, config.exec, |i| {
        let seed = derive_seed(config.seed, i);
        let meas = simulate_measurements(world, &config.noise.into(), seed);
        variants
            .iter()
            .map(|cfg| {
                let start = Instant::now();
                let out = run_filter(cfg, world, &meas, &config.noise, config.init, seed ^ 0x5EED);
                let elapsed = start.elapsed().as_secs_f64();
                out.map(|o| (o.records, elapsed)).map_err(|e| e.to_string())
            })
            .collect()
    });

    let mut summaries = Vec::new();
    let mut series = Vec::new();
    let mut failures = Vec::new();
    for (vi, cfg) in variants.iter().enumerate() {
        let runs: Vec<&RunResult> = per_run.iter().map(|r| &r[vi]).collect();
        for (run, r) in runs.iter().enumerate() {
            if let Err(message) = r {
                failures.push(FailedRun { run, variant: cfg.variant, message: message.clone() });
            }
        }
        let (s, ser) = aggregate_variant(cfg.variant, steps, &runs, config.timing);
        summaries.push(s);
        series.push(ser);
    }
    Ok(MonteCarloReport { runs: config.runs, summaries, series, failures })
}

/// Generates the environment and aggregates over it.
pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<(World, MonteCarloReport)> {
    let world = generate_environment(&config.env)?;
    let report = aggregate_monte_carlo(config, &world)?;
    Ok((world, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::AppKind;
    use crate::sim::measure::simulate_measurements;

    fn small(runs: usize) -> MonteCarloConfig {
        let env = EnvironmentSpec { steps: 40, ..EnvironmentSpec::desk(AppKind::Point) };
        let mut c = MonteCarloConfig::new(env, NoiseSpec::new(0.003, 0.01, 0.1).unwrap(), runs, 7);
        c.variants = vec![FilterVariant::Std, FilterVariant::AffV1];
        c.timing = false;
        c
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let mut sorted = seeds.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(derive_seed(7, 3), seeds[3]);
        assert_ne!(derive_seed(8, 3), seeds[3]);
    }

    #[test]
    fn single_run_report_is_that_run() {
        let config = small(1);
        let (world, report) = run_monte_carlo(&config).unwrap();
        let meas = simulate_measurements(&world, &config.noise.into(), derive_seed(7, 0));
        let cfg = make_variant(&config.env.model(), FilterVariant::Std).unwrap();
        let out = run_filter(&cfg, &world, &meas, &config.noise, config.init, derive_seed(7, 0) ^ 0x5EED).unwrap();
        let s = report.summary(FilterVariant::Std).unwrap();
        let expect_pos = mean(&out.records.iter().map(|r| r.err_pos).collect::<Vec<_>>());
        let expect_nees = mean(&out.records.iter().map(|r| r.nees_pose).collect::<Vec<_>>());
        assert!((s.rmse_pos - expect_pos).abs() < 1e-15);
        assert!((s.nees_pose - expect_nees).abs() < 1e-15);
        assert_eq!(s.time_s, 0.0);
        assert!(report.complete());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut a = small(3);
        a.exec = Execution::Sequential;
        let mut b = small(3);
        b.exec = Execution::Parallel;
        assert_eq!(run_monte_carlo(&a).unwrap().1, run_monte_carlo(&b).unwrap().1);
    }
}
