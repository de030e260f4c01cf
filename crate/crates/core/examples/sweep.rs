//! Sigma sweep over a fixture config, run on two workers.

use std::path::Path;

use pnp_admm::cli::{cmd_sweep, SweepGrid};

fn main() -> pnp_admm::Result<()> {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/configs/experiment_sr.toml");
    let out = std::env::temp_dir().join("pnp_admm_sweep_example");
    let grid = SweepGrid {
        sigmas: vec![0.02, 0.05, 0.1],
        gammas: vec![],
    };
    let (dir, rows) = cmd_sweep(&config, &grid, 2, Some(&out), None)?;
    for r in &rows {
        let psnr = r.outcome.as_ref().ok().and_then(|m| m.psnr).unwrap_or(f64::NAN);
        println!("sigma {:<5} psnr {psnr:.3} dB {}", r.sigma, if r.best { "*" } else { "" });
    }
    println!("{}", dir.join("sweep.csv").display());
    Ok(())
}
