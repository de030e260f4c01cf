//! Closing the mismatch gap: final PSNR as the denoiser prior moves from a
//! shifted Gaussian to the target, and along a mixture-to-mixture path.

use pnp_admm::adaptation::{interpolate_prior, AdaptationPath};
use pnp_admm::canonical::{Instance, SEED};
use pnp_admm::priors::{AnalyticPrior, Component};
use pnp_admm::solver::THEORY_ITERATIONS;

fn main() -> pnp_admm::Result<()> {
    let inst = Instance::gaussian(SEED)?;
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    println!("alpha  psnr (dB)");
    for (alpha, db) in inst.adaptation_psnr(&alphas, THEORY_ITERATIONS)? {
        println!("{alpha:<5}  {db:.3}");
    }

    let source = AnalyticPrior::gmm(vec![Component::new(0.5, -1.0, 0.3), Component::new(0.5, 1.5, 0.3)])?;
    let target = AnalyticPrior::gmm(vec![
        Component::new(0.2, -2.0, 0.1),
        Component::new(0.5, 0.0, 0.5),
        Component::new(0.3, 2.0, 0.1),
    ])?;
    let path = AdaptationPath::quarters(source, target);
    println!("\nmixture path (weight, mean, variance)");
    for &alpha in &path.alphas {
        let p = interpolate_prior(&path, alpha)?;
        let comps: Vec<String> = p
            .components()
            .iter()
            .map(|c| format!("({:.3}, {:.3}, {:.3})", c.weight, c.mean, c.variance))
            .collect();
        println!("{alpha:<5} {}", comps.join(" "));
    }
    Ok(())
}
