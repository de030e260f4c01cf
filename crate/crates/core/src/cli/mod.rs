//! Command implementations behind the `pnp-admm` binary: `run`, `verify`,
//! `sweep` and `denoise`. Each writes plain-text artifacts (CSV, PGM/PPM,
//! JSON lines) that are byte-identical across runs with the same seed.

pub mod config;
pub mod csv;
pub mod verify;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::diagnostics::metrics;
use crate::error::{Error, Result};
use crate::pnm::{read_image, write_image, BitDepth};
use crate::priors::Denoiser;
use crate::solver::{run, SigmaSchedule, SolverMode, SolverTrace};

pub use config::{parse_prior, ExperimentConfig};
pub use verify::{cmd_verify, CheckRecord, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable read by the binary for the default output directory.
pub const OUT_DIR_ENV: &str = "PNP_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "pnp_out";

/// `--out` (or the environment default) wins over the config's `output_dir`.
pub fn resolve_out_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    match (cli, &cfg.output_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) if p.is_absolute() => p.clone(),
        (None, Some(p)) => cfg.base_dir.join(p),
        (None, None) => PathBuf::from(FALLBACK_OUT_DIR),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs one configured experiment and writes `trace.csv`, `x_hat.pgm`
/// (or `.ppm`) and `summary.txt` into `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: &Path) -> Result<SolverTrace> {
    let started = Instant::now();
    let problem = cfg.build()?;
    let trace = run(
        &problem.fidelity,
        &problem.target,
        problem.z_step.as_deref(),
        &problem.solver,
        problem.ground_truth.as_ref(),
    )?;
    create_dir(dir)?;
    write_text(&dir.join("trace.csv"), &csv::trace_to_csv(&trace.rows))?;
    let x_hat = trace.x_hat();
    let name = if x_hat.channels() == 3 { "x_hat.ppm" } else { "x_hat.pgm" };
    write_image(dir.join(name), x_hat, BitDepth::Eight)?;

    let last = trace.last();
    let mut summary = String::new();
    let _ = writeln!(summary, "iterations          {}", trace.rows.len());
    let _ = writeln!(summary, "final sigma         {:.6e}", last.sigma_k);
    let _ = writeln!(summary, "final phi           {:.10e}", last.phi);
    let _ = writeln!(summary, "final grad_f_norm   {:.10e}", last.grad_f_norm);
    let _ = writeln!(summary, "final z_step_norm   {:.10e}", last.z_step_norm);
    if let Some(p) = last.psnr {
        let _ = writeln!(summary, "final psnr          {p:.6} dB");
    }
    if let Some(s) = last.ssim {
        let _ = writeln!(summary, "final ssim          {s:.6}");
    }
    let _ = writeln!(summary, "seed                {}", cfg.seed);
    let _ = writeln!(summary, "wall time           {:.3} s", started.elapsed().as_secs_f64());
    let _ = writeln!(summary, "\n# config\n{}", cfg.source.trim_end());
    write_text(&dir.join("summary.txt"), &summary)?;
    Ok(trace)
}

pub fn cmd_run(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(PathBuf, SolverTrace)> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = resolve_out_dir(out, &cfg);
    let trace = run_to_dir(&cfg, &dir)?;
    Ok((dir, trace))
}

/// Grid over σ (the constant σ in theory mode, σ_optim in experiment mode)
/// and γ. An empty axis keeps the config's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepGrid {
    pub sigmas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl SweepGrid {
    /// Comma-separated reals, e.g. `0.05,0.1,0.2`.
    pub fn parse_axis(text: &str) -> Result<Vec<f64>> {
        text.split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad grid value `{t}`")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: usize,
    pub sigma: f64,
    pub gamma: f64,
    pub outcome: std::result::Result<SweepMetrics, String>,
    pub best: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMetrics {
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub grad_f_norm: f64,
}

fn configured_sigma(cfg: &ExperimentConfig) -> Result<f64> {
    match cfg.solver_config()?.schedule {
        SigmaSchedule::Constant(s) => Ok(s),
        SigmaSchedule::LogDecay { start, .. } => Ok(start),
    }
}

fn with_point(cfg: &ExperimentConfig, sigma: f64, gamma: f64) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    c.solver.gamma = gamma;
    match cfg.solver_config()?.mode {
        SolverMode::Theory => c.solver.sigma = Some(sigma),
        SolverMode::Experiment => {
            c.solver.sigma_start = Some(sigma);
            c.solver.sigma = None;
        }
    }
    Ok(c)
}

/// One run per grid point in `point_NNN/`, then `sweep.csv` with the best
/// final PSNR marked. A failing point is recorded and the sweep continues.
pub fn cmd_sweep(
    config: &Path,
    grid: &SweepGrid,
    workers: usize,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<(PathBuf, Vec<SweepRow>)> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = resolve_out_dir(out, &cfg);
    let sigmas = if grid.sigmas.is_empty() { vec![configured_sigma(&cfg)?] } else { grid.sigmas.clone() };
    let gammas = if grid.gammas.is_empty() { vec![cfg.solver.gamma] } else { grid.gammas.clone() };
    let points: Vec<(f64, f64)> = sigmas
        .iter()
        .flat_map(|&s| gammas.iter().map(move |&g| (s, g)))
        .collect();
    create_dir(&dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let mut rows: Vec<SweepRow> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, &(sigma, gamma))| {
                let outcome = with_point(&cfg, sigma, gamma)
                    .and_then(|c| run_to_dir(&c, &dir.join(format!("point_{i:03}"))))
                    .map(|t| {
                        let last = t.last();
                        SweepMetrics {
                            psnr: last.psnr,
                            ssim: last.ssim,
                            grad_f_norm: last.grad_f_norm,
                        }
                    })
                    .map_err(|e| e.to_string());
                SweepRow {
                    point: i,
                    sigma,
                    gamma,
                    outcome,
                    best: false,
                }
            })
            .collect()
    });

    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.outcome.as_ref().ok().and_then(|m| m.psnr).map(|p| (i, p)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    if let Some(i) = best {
        rows[i].best = true;
    }
    write_text(&dir.join("sweep.csv"), &sweep_to_csv(&rows))?;
    Ok((dir, rows))
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("point,sigma,gamma,final_psnr,final_ssim,final_grad_f_norm,status,best\n");
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.16e}")).unwrap_or_default();
    for r in rows {
        let _ = write!(out, "{},{:.16e},{:.16e},", r.point, r.sigma, r.gamma);
        match &r.outcome {
            Ok(m) => {
                let _ = write!(out, "{},{},{:.16e},ok", opt(m.psnr), opt(m.ssim), m.grad_f_norm);
            }
            Err(e) => {
                let _ = write!(out, ",,,\"error: {}\"", e.replace('"', "'"));
            }
        }
        let _ = writeln!(out, ",{}", if r.best { "*" } else { "" });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseReport {
    pub psnr_in: Option<f64>,
    pub psnr_out: Option<f64>,
}

/// One MMSE denoising pass over an image file.
pub fn cmd_denoise(
    input: &Path,
    prior: &str,
    sigma: f64,
    output: &Path,
    reference: Option<&Path>,
) -> Result<DenoiseReport> {
    let v = read_image(input)?;
    let d = Denoiser::target(parse_prior(prior)?);
    let out = d.denoise(&v, sigma)?;
    if !output.extension().is_some_and(|e| e == "pgm" || e == "ppm") {
        return Err(Error::InvalidArgument("output must end in .pgm or .ppm".into()));
    }
    write_image(output, &out, BitDepth::Eight)?;
    let reference = reference.map(read_image).transpose()?;
    let psnr = |x| -> Result<Option<f64>> {
        reference
            .as_ref()
            .map(|r| metrics::psnr(x, r).map(metrics::capped))
            .transpose()
    };
    Ok(DenoiseReport {
        psnr_in: psnr(&v)?,
        psnr_out: psnr(&out)?,
    })
}
