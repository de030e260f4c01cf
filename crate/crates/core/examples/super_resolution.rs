//! x2 super-resolution of a fixture image in experiment mode (15 iterations,
//! geometric sigma decay), closed-form FFT prox against the CG prox.

use std::path::Path;

use pnp_admm::operators::{L2Fidelity, MeasurementModel, ProxSolverConfig};
use pnp_admm::pnm::read_image;
use pnp_admm::priors::{AnalyticPrior, Denoiser};
use pnp_admm::solver::{run, SolverConfig};
use pnp_admm::{gaussian_noise, Rng};

fn main() -> pnp_admm::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/images/disk.pgm");
    let truth = read_image(path)?;
    let model = MeasurementModel::new(pnp_admm::operators::Kernel::gaussian(1.2)?, 2, 0.01)?;
    let mut rng = Rng::new(3);
    let clean = model.forward(&truth)?;
    let y = clean.add(&gaussian_noise(clean.shape(), model.noise_sigma(), &mut rng)?);

    let (mean, var) = (truth.mean(), truth.map(|t| (t - truth.mean()).powi(2)).mean());
    let denoiser = Denoiser::target(AnalyticPrior::gaussian(mean, var)?);
    let cfg = SolverConfig::experiment(1.0, 0.05);

    for (label, prox) in [
        ("fft", ProxSolverConfig::default()),
        ("cg ", ProxSolverConfig::conjugate_gradient(1e-12, 2000)),
    ] {
        let fidelity = L2Fidelity::new(model.clone(), y.clone(), prox);
        let trace = run(&fidelity, &denoiser, None, &cfg, Some(&truth))?;
        let last = trace.last();
        println!(
            "{label}  iterations {}  sigma {:.3} -> {:.3}  psnr {:.3} dB  ssim {:.4}",
            trace.rows.len(),
            trace.rows[0].sigma_k,
            last.sigma_k,
            last.psnr.unwrap_or(f64::NAN),
            last.ssim.unwrap_or(f64::NAN)
        );
    }
    let back = model.back_projection(&y, truth.shape())?;
    println!("back-projection psnr {:.3} dB", pnp_admm::diagnostics::metrics::psnr(&back, &truth)?);
    Ok(())
}
