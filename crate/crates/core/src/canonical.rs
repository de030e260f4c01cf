//! Reference problems for the convergence checks.
//!
//! The theory instance is plain denoising (identity measurement) of an
//! image drawn from a standard normal prior, with the exact Gaussian MMSE
//! denoiser at σ = 0.5. For a Gaussian prior `γL = σ²/τ²`, so the step
//! condition `γ = 1/(4L)` holds for every `γ`. We take `γ = 0.5`, `L = 0.5`:
//! at `γ = 1` the identity problem reaches its fixed point in two steps,
//! which leaves the descent checks nothing to check.

use crate::adaptation::{interpolate_prior, AdaptationPath};
use crate::error::Result;
use crate::image::{gaussian_noise, ImageBuffer, Rng, Shape};
use crate::operators::{L2Fidelity, MeasurementModel, ProxSolverConfig};
use crate::priors::{AnalyticPrior, Denoiser};
use crate::solver::{run, SolverConfig, SolverTrace, ZStep};

pub const SIGMA: f64 = 0.5;
pub const TAU2: f64 = 1.0;
pub const MEAN: f64 = 0.0;
pub const GAMMA: f64 = 0.5;
pub const MEASUREMENT_NOISE: f64 = 0.1;
pub const SIZE: usize = 16;
pub const SEED: u64 = 2024;
/// Mean offset of the mismatched prior in the theorem checks.
pub const MISMATCH_SHIFT: f64 = 1.0;
/// Mean offset of the adaptation source prior.
pub const ADAPTATION_SHIFT: f64 = 0.5;
pub const REFERENCE_ITERATIONS: usize = 2000;

pub struct Instance {
    pub fidelity: L2Fidelity,
    pub target: Denoiser,
    pub ground_truth: ImageBuffer,
    pub gamma: f64,
    pub sigma: f64,
}

impl Instance {
    pub fn gaussian(seed: u64) -> Result<Self> {
        Self::with_size(seed, SIZE)
    }

    pub fn with_size(seed: u64, size: usize) -> Result<Self> {
        let prior = AnalyticPrior::gaussian(MEAN, TAU2)?;
        let mut rng = Rng::new(seed);
        let shape = Shape::gray(size, size);
        let x = prior.sample_image(shape, &mut rng);
        let model = MeasurementModel::identity(MEASUREMENT_NOISE);
        let y = x.add(&gaussian_noise(shape, MEASUREMENT_NOISE, &mut rng)?);
        Ok(Self {
            fidelity: L2Fidelity::new(model, y, ProxSolverConfig::default()),
            target: Denoiser::target(prior),
            ground_truth: x,
            gamma: GAMMA,
            sigma: SIGMA,
        })
    }

    /// `σ²/(γτ²)`
    pub fn lipschitz(&self) -> f64 {
        self.sigma * self.sigma / (self.gamma * TAU2)
    }

    pub fn config(&self, iterations: usize) -> SolverConfig {
        SolverConfig::theory(self.gamma, self.sigma)
            .with_iterations(iterations)
            .keeping_iterates()
    }

    /// Same variance, mean shifted by `shift`.
    pub fn shifted_denoiser(&self, shift: f64) -> Result<Denoiser> {
        Ok(Denoiser::mismatched(AnalyticPrior::gaussian(MEAN + shift, TAU2)?))
    }

    pub fn run(&self, step: Option<&dyn ZStep>, iterations: usize) -> Result<SolverTrace> {
        run(
            &self.fidelity,
            &self.target,
            step,
            &self.config(iterations),
            Some(&self.ground_truth),
        )
    }

    /// Long run with the same z-step; its final φ serves as φ* and its
    /// final z as z*.
    pub fn reference(&self, step: Option<&dyn ZStep>) -> Result<Reference> {
        let cfg = SolverConfig::theory(self.gamma, self.sigma).with_iterations(REFERENCE_ITERATIONS);
        let trace = run(&self.fidelity, &self.target, step, &cfg, None)?;
        Ok(Reference {
            phi_star: trace.last().phi,
            z_star: trace.final_state.z.clone(),
        })
    }

    /// Final PSNR along the adaptation path from a prior shifted by
    /// [`ADAPTATION_SHIFT`] to the target.
    pub fn adaptation_psnr(&self, alphas: &[f64], iterations: usize) -> Result<Vec<(f64, f64)>> {
        let source = AnalyticPrior::gaussian(MEAN + ADAPTATION_SHIFT, TAU2)?;
        let path = AdaptationPath::new(source, self.target.prior().clone(), alphas.to_vec())?;
        alphas
            .iter()
            .map(|&a| {
                let d = Denoiser::mismatched(interpolate_prior(&path, a)?);
                let trace = self.run(Some(&d), iterations)?;
                Ok((a, trace.last().psnr.expect("ground truth supplied")))
            })
            .collect()
    }
}

pub struct Reference {
    pub phi_star: f64,
    pub z_star: ImageBuffer,
}
