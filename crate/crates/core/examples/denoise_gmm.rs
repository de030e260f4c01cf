//! One-shot MMSE denoising under a two-component Gaussian mixture prior,
//! compared with the Gaussian prior that matches its first two moments.

use pnp_admm::diagnostics::metrics::psnr;
use pnp_admm::priors::{AnalyticPrior, Component, Denoiser};
use pnp_admm::{gaussian_noise, Rng, Shape};

fn main() -> pnp_admm::Result<()> {
    let prior = AnalyticPrior::gmm(vec![Component::new(0.6, 0.2, 0.005), Component::new(0.4, 0.8, 0.005)])?;
    let (mean, var) = prior.moments();
    let moment_matched = AnalyticPrior::gaussian(mean, var)?;

    let mut rng = Rng::new(1);
    let shape = Shape::gray(64, 64);
    let clean = prior.sample_image(shape, &mut rng);
    println!("sigma   noisy    gmm      gaussian  (PSNR dB)");
    for sigma in [0.05, 0.1, 0.2, 0.4] {
        let noisy = clean.add(&gaussian_noise(shape, sigma, &mut rng)?);
        let gmm = Denoiser::target(prior.clone()).denoise(&noisy, sigma)?;
        let gauss = Denoiser::target(moment_matched.clone()).denoise(&noisy, sigma)?;
        println!(
            "{sigma:<6}  {:>6.2}   {:>6.2}   {:>6.2}",
            psnr(&noisy, &clean)?,
            psnr(&gmm, &clean)?,
            psnr(&gauss, &clean)?
        );
    }
    Ok(())
}
