use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pnp_admm::cli::{self, verify, SweepGrid, EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "pnp-admm", version, about = "PnP-ADMM with analytic MMSE denoisers")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv, x_hat and summary.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run an invariant suite; prints one JSON object per check.
    Verify {
        /// tweedie, prox-identity, lemma-descent, theorem1, theorem2,
        /// remark1, adjoint, prox-oracle, metrics or all
        #[arg(long, default_value = "all")]
        suite: String,
        /// Use the mismatched denoiser (lemma-descent).
        #[arg(long)]
        mismatched: bool,
        /// Also write verify.jsonl here.
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// One run per (sigma, gamma) grid point, aggregated into sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Comma-separated sigma values (sigma_optim in experiment mode).
        #[arg(long, default_value = "")]
        sigma_grid: String,
        #[arg(long, default_value = "")]
        gamma_grid: String,
    },
    /// One MMSE denoising pass over a PGM/PPM image.
    Denoise {
        input: PathBuf,
        /// `gaussian:MEAN,VAR` or `gmm:W,M,V;W,M,V;...`
        #[arg(long)]
        prior: String,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

fn execute(command: Command) -> pnp_admm::Result<i32> {
    match command {
        Command::Run { config, out, seed } => {
            let (dir, trace) = cli::cmd_run(&config, out.as_deref(), seed)?;
            let last = trace.last();
            println!("{} iterations, final grad_f_norm {:.6e}", trace.rows.len(), last.grad_f_norm);
            if let Some(p) = last.psnr {
                println!("final psnr {p:.4} dB");
            }
            println!("artifacts in {}", dir.display());
            Ok(EXIT_OK)
        }
        Command::Verify { suite, mismatched, out } => {
            let mut log = Vec::new();
            let passed = verify::cmd_verify(&suite, mismatched, &mut log)?;
            print!("{}", String::from_utf8_lossy(&log));
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .and_then(|_| std::fs::write(dir.join("verify.jsonl"), &log))
                    .map_err(|e| pnp_admm::Error::Io { path: dir, source: e })?;
            }
            eprintln!("{suite}: {}", if passed { "PASS" } else { "FAIL" });
            Ok(if passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Sweep {
            config,
            out,
            seed,
            workers,
            sigma_grid,
            gamma_grid,
        } => {
            let grid = SweepGrid {
                sigmas: SweepGrid::parse_axis(&sigma_grid)?,
                gammas: SweepGrid::parse_axis(&gamma_grid)?,
            };
            let (dir, rows) = cli::cmd_sweep(&config, &grid, workers, out.as_deref(), seed)?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!("{} points ({failed} failed), sweep.csv in {}", rows.len(), dir.display());
            Ok(EXIT_OK)
        }
        Command::Denoise {
            input,
            prior,
            sigma,
            output,
            reference,
        } => {
            let report = cli::cmd_denoise(&input, &prior, sigma, &output, reference.as_deref())?;
            if let (Some(a), Some(b)) = (report.psnr_in, report.psnr_out) {
                println!("psnr in {a:.4} dB, out {b:.4} dB");
            }
            println!("wrote {}", output.display());
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            return ExitCode::from(code as u8);
        }
    };
    match execute(args.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
