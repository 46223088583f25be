//! CSV output: `summary.csv`, `series_<variant>.csv` and `env.csv`.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), LF line endings.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::env::World;
use super::montecarlo::{MonteCarloReport, VariantSummary};
use crate::apps::FilterVariant;
use crate::error::{Error, Result};

pub const SUMMARY_HEADER: &str = "variant,rmse_ori,rmse_pos,rmse_feat,nees_pose,nees_feat,time_s";
pub const SERIES_HEADER: &str = "step,rmse_ori,rmse_pos,nees_pose,nees_feat,err_ori,err_pos,bound3s_ori,bound3s_pos";
pub const ENV_HEADER: &str = "kind,index,x,y,z";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_lines(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes the three file kinds into `dir` (created if missing) and returns their paths.
pub fn export_csv(report: &MonteCarloReport, world: &World, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let summary = dir.join("summary.csv");
    write_lines(
        &summary,
        SUMMARY_HEADER,
        report.summaries.iter().map(|s| {
            [s.rmse_ori, s.rmse_pos, s.rmse_feat, s.nees_pose, s.nees_feat, s.time_s]
                .iter()
                .fold(s.variant.name().to_string(), |acc, v| acc + "," + &num(*v))
        }),
    )?;
    written.push(summary);

    for s in &report.series {
        let path = dir.join(format!("series_{}.csv", s.variant.name()));
        write_lines(
            &path,
            SERIES_HEADER,
            s.rows.iter().map(|r| {
                [r.rmse_ori, r.rmse_pos, r.nees_pose, r.nees_feat, r.err_ori, r.err_pos, r.bound3s_ori, r.bound3s_pos]
                    .iter()
                    .fold(r.step.to_string(), |acc, v| acc + "," + &num(*v))
            }),
        )?;
        written.push(path);
    }

    let env = dir.join("env.csv");
    let features = world.features.iter().enumerate().map(|(i, f)| format!("feature,{i},{},{},{}", num(f.x), num(f.y), num(f.z)));
    let poses = world.poses.iter().enumerate().map(|(i, x)| {
        let p = x.position;
        format!("trajectory,{i},{},{},{}", num(p.x), num(p.y), num(p.z))
    });
    write_lines(&env, ENV_HEADER, features.chain(poses))?;
    written.push(env);
    Ok(written)
}

/// Parses a `summary.csv` written by [`export_csv`].
pub fn read_summary(path: &Path) -> Result<Vec<VariantSummary>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = |message: String| Error::Config { field: path.display().to_string(), message };
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(bad("unexpected header".into()));
    }
    lines
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(bad(format!("expected 7 columns in '{line}'")));
            }
            let variant: FilterVariant = cols[0].parse()?;
            let v = cols[1..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|e| bad(format!("'{c}': {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            Ok(VariantSummary {
                variant,
                rmse_ori: v[0],
                rmse_pos: v[1],
                rmse_feat: v[2],
                nees_pose: v[3],
                nees_feat: v[4],
                time_s: v[5],
                runs_ok: 0,
            })
        })
        .collect()
}
