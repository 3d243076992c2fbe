//! Seed orchestration and on-disk artifacts: per-seed `trajectory.csv`
//! and `tstar.json`, plus a `meta.json` with the resolved configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{resolve_constants, ResolvedConstants, RunConfig};
use crate::error::{Error, Result};
use crate::optimizers::{self, FaultInjection, RunOptions, RunOutput, RunSeeds, TrajectoryRecord};
use crate::problems::ProblemInstance;

pub const ARTIFACT_VERSION: &str = "1";

pub const CSV_HEADER: &str = "t,alpha_t,f_x,phi_x,phi_x_hat,dist_sq_weighted,moreau_grad_sq,\
subdiff_dist_sq_bound,vhat_min,vhat_max,vhat_sqrt_sum,lemma_lhs_running";

/// Executes every seed of a config in a worker pool and returns the raw
/// outputs, without touching the filesystem.
pub fn run_all_seeds(
    config: &RunConfig,
    workers: Option<usize>,
    eval_reports: bool,
    fault: FaultInjection,
) -> Result<Vec<(u64, RunOutput)>> {
    config.validate()?;
    let instance = config.problem.build()?;
    let constants = resolve_constants(config, &instance)?;
    let moreau = config.moreau_config(constants.rho_effective)?;
    let options = RunOptions {
        horizon: config.horizon,
        checkpoints: if eval_reports { config.resolved_checkpoints() } else { Vec::new() },
        eval_reports,
        x_init: None,
        fault,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    pool.install(|| {
        config
            .seeds
            .par_iter()
            .map(|&seed| {
                let out = optimizers::run(
                    &instance,
                    &config.optimizer,
                    &options,
                    &RunSeeds::from_single(seed),
                    Some(&moreau),
                )?;
                Ok((seed, out))
            })
            .collect()
    })
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    version: &'static str,
    config: &'a RunConfig,
    constants: &'a ResolvedConstants,
}

#[derive(Debug, Serialize)]
struct TStarDoc<'a> {
    t_star: usize,
    report: Option<&'a crate::moreau::StationarityReport>,
}

fn render_csv(records: &[TrajectoryRecord]) -> Result<String> {
    let mut text = String::from(CSV_HEADER);
    text.push('\n');
    for r in records {
        let fields = [
            r.alpha_t,
            r.f_x,
            r.phi_x,
            r.phi_x_hat,
            r.dist_sq_weighted,
            r.moreau_grad_sq,
            r.subdiff_dist_sq_bound,
            r.vhat_min,
            r.vhat_max,
            r.vhat_sqrt_sum,
            r.lemma_lhs_running,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                what: format!("non-finite value in trajectory row t={}", r.t),
                residual: f64::NAN,
            });
        }
        text.push_str(&r.t.to_string());
        for v in fields {
            text.push(',');
            text.push_str(&format!("{v}"));
        }
        text.push('\n');
    }
    Ok(text)
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    Ok(())
}

/// Runs all seeds and writes the artifact tree under `out_dir`:
/// `meta.json`, and `seed_<s>/{trajectory.csv, tstar.json}`. On failure a
/// `PARTIAL` marker file is left in the directory.
pub fn execute(config: &RunConfig, out_dir: &Path, workers: Option<usize>) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let marker = out_dir.join("PARTIAL");
    write_atomic(&marker, "run in progress or aborted\n")?;
    let result = execute_inner(config, out_dir, workers);
    if result.is_ok() {
        fs::remove_file(&marker)?;
    }
    result.map(|_| out_dir.to_path_buf())
}

fn execute_inner(config: &RunConfig, out_dir: &Path, workers: Option<usize>) -> Result<()> {
    config.validate()?;
    let instance: ProblemInstance = config.problem.build()?;
    let constants = resolve_constants(config, &instance)?;
    let meta = Meta {
        version: ARTIFACT_VERSION,
        config,
        constants: &constants,
    };
    write_atomic(
        &out_dir.join("meta.json"),
        &format!("{}\n", serde_json::to_string_pretty(&meta)?),
    )?;

    let outputs = run_all_seeds(config, workers, true, FaultInjection::None)?;
    for (seed, out) in &outputs {
        let seed_dir = out_dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&seed_dir)?;
        write_atomic(&seed_dir.join("trajectory.csv"), &render_csv(&out.records)?)?;
        let tstar = TStarDoc {
            t_star: out.t_star,
            report: out.star_report.as_ref(),
        };
        write_atomic(
            &seed_dir.join("tstar.json"),
            &format!("{}\n", serde_json::to_string_pretty(&tstar)?),
        )?;
    }
    Ok(())
}
