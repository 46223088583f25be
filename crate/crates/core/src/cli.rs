//! `affekf` command line.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 on bad arguments or configuration.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::apps::audit::{audit_model, format_audit, AuditSettings};
use crate::apps::{make_variant, AppKind, AppModel, Chart, FilterVariant};
use crate::error::Error;
use crate::sim::config::{parse_variants, split_list, RunConfig};
use crate::sim::csv::export_csv;
use crate::sim::equivalence::equivalence_run;
use crate::sim::montecarlo::{derive_seed, run_monte_carlo, MonteCarloReport};
use crate::sim::{generate_environment, simulate_measurements};

const EQUIVALENCE_STATE_TOL: f64 = 1e-9;
const EQUIVALENCE_COV_TOL: f64 = 1e-8;

#[derive(Debug, Parser)]
#[command(name = "affekf", version, about = "Affine-atlas EKF SLAM simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single run with the full per-step series.
    Simulate(Common),
    /// Monte Carlo aggregate over many runs.
    Montecarlo(Common),
    /// Observability report for every variant of the configured application.
    ObservabilityAudit(Common),
    /// Dual run of an affine-atlas filter against the corrected standard filter.
    EquivalenceCheck(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma separated variant names, e.g. `std,aff_v1`.
    #[arg(long)]
    variants: Option<String>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::VariantUnsupported { .. } | Error::InfeasibleSpec(_) => Failure::Usage(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mc = &mut cfg.montecarlo;
    if let Some(runs) = common.runs {
        if runs == 0 {
            return Err(Error::Config { field: "run.runs".into(), message: "at least one run is required".into() }.into());
        }
        mc.runs = runs;
    }
    if let Some(seed) = common.seed {
        mc.seed = seed;
    }
    if let Some(list) = &common.variants {
        mc.variants = parse_variants(&split_list(list))?;
    }
    for v in &mc.variants {
        if !FilterVariant::supported(mc.env.app).contains(v) {
            return Err(Error::Config {
                field: "run.variants".into(),
                message: format!("variant '{v}' is not available for this application"),
            }
            .into());
        }
    }
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    Ok(cfg)
}

fn format_report(report: &MonteCarloReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<7} {:>11} {:>11} {:>11} {:>10} {:>10} {:>9}", "variant", "rmse_ori", "rmse_pos", "rmse_feat", "nees_pose", "nees_feat", "time_s");
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "{:<7} {:>11.4e} {:>11.4e} {:>11.4e} {:>10.3} {:>10.3} {:>9.3}",
            s.variant.name(),
            s.rmse_ori,
            s.rmse_pos,
            s.rmse_feat,
            s.nees_pose,
            s.nees_feat,
            s.time_s
        );
    }
    for f in &report.failures {
        let _ = writeln!(out, "run {} {} failed: {}", f.run, f.variant, f.message);
    }
    out
}

fn run_aggregate(mut cfg: RunConfig, single: bool) -> Result<(), Failure> {
    if single {
        cfg.montecarlo.runs = 1;
    }
    let (world, report) = run_monte_carlo(&cfg.montecarlo)?;
    print!("{}", format_report(&report));
    let dir = cfg.out.unwrap_or_else(|| PathBuf::from("out"));
    let files = export_csv(&report, &world, &dir).map_err(|e| Failure::Run(e.to_string()))?;
    println!("wrote {} files to {}", files.len(), dir.display());
    if report.complete() {
        Ok(())
    } else {
        Err(Failure::Run(format!("{} run(s) failed", report.failures.len())))
    }
}

fn run_audit(cfg: RunConfig) -> Result<(), Failure> {
    let mc = cfg.montecarlo;
    let settings = AuditSettings { seed: mc.seed, exec: mc.exec, ..AuditSettings::default() };
    let features = match mc.env.app {
        AppKind::Point => 1,
        _ => 3,
    };
    let model = AppModel { kind: mc.env.app, features };
    let rows = audit_model(&model, &mc.variants, &settings)?;
    print!("{}", format_audit(&rows));
    Ok(())
}

fn run_equivalence(cfg: RunConfig) -> Result<(), Failure> {
    let mc = cfg.montecarlo;
    let model = mc.env.model();
    let variant = mc
        .variants
        .iter()
        .copied()
        .find(|v| matches!(make_variant(&model, *v).map(|c| c.chart), Ok(Chart::Affine(_))))
        .ok_or_else(|| Failure::Usage("run.variants: no affine-atlas variant selected".into()))?;
    let world = generate_environment(&mc.env)?;
    let meas = simulate_measurements(&world, &mc.noise.into(), derive_seed(mc.seed, 0));
    let r = equivalence_run(&world, &meas, &mc.noise, variant)?;
    println!("variant: {variant}");
    println!("steps: {}", r.steps);
    println!("max state diff: {:.3e}", r.max_state_diff);
    println!("max covariance relative error: {:.3e}", r.max_cov_rel);
    if r.max_state_diff < EQUIVALENCE_STATE_TOL && r.max_cov_rel < EQUIVALENCE_COV_TOL {
        Ok(())
    } else {
        Err(Failure::Run("implementations disagree".into()))
    }
}

/// Runs the command line and returns the process exit code.
pub fn cli_main(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Simulate(c) => load(c).and_then(|cfg| run_aggregate(cfg, true)),
        Command::Montecarlo(c) => load(c).and_then(|cfg| run_aggregate(cfg, false)),
        Command::ObservabilityAudit(c) => load(c).and_then(run_audit),
        Command::EquivalenceCheck(c) => load(c).and_then(run_equivalence),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}
