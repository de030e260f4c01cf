//! PnP-ADMM:
//!
//! ```text
//! x^k = prox_{γg}(z^{k-1} - s^{k-1})
//! z^k = D_σ(x^k + s^{k-1})        (or a mismatched D̂_σ)
//! s^k = s^{k-1} + x^k - z^k
//! ```
//!
//! Each iteration also records the augmented Lagrangian and `‖∇f(x^k)‖`
//! for the regularizer of the target denoiser, so traces can be fed
//! straight into [`crate::diagnostics`].

use crate::diagnostics::{self, metrics};
use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::operators::DataFidelity;
use crate::priors::{Denoiser, RegularizerContext};

/// The z-update of the iteration. `k` starts at 1.
pub trait ZStep: Send + Sync {
    fn apply(&self, v: &ImageBuffer, sigma: f64, k: usize) -> Result<ImageBuffer>;
}

impl ZStep for Denoiser {
    fn apply(&self, v: &ImageBuffer, sigma: f64, _k: usize) -> Result<ImageBuffer> {
        self.denoise(v, sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaSchedule {
    Constant(f64),
    LogDecay { start: f64, end: f64 },
}

impl SigmaSchedule {
    fn validate(&self) -> Result<()> {
        let ok = |s: f64| s > 0.0 && s.is_finite();
        let valid = match *self {
            SigmaSchedule::Constant(s) => ok(s),
            SigmaSchedule::LogDecay { start, end } => ok(start) && ok(end),
        };
        if valid {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("sigma schedule {self:?} needs positive values")))
        }
    }
}

/// σ used at iteration `k` of `total` (1-based).
pub fn sigma_at(schedule: SigmaSchedule, k: usize, total: usize) -> f64 {
    match schedule {
        SigmaSchedule::Constant(s) => s,
        SigmaSchedule::LogDecay { start, .. } if total <= 1 => start,
        SigmaSchedule::LogDecay { start, end } => {
            let k = k.clamp(1, total);
            if k == total {
                return end;
            }
            start * (end / start).powf((k - 1) as f64 / (total - 1) as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    /// Constant σ and `γ ≤ 1/(4L)` enforced.
    Theory,
    /// Any schedule; diagnostics use the regularizer of the current σ.
    Experiment,
}

pub const THEORY_ITERATIONS: usize = 200;
pub const EXPERIMENT_ITERATIONS: usize = 15;
pub const EXPERIMENT_SIGMA_END: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub iterations: usize,
    pub schedule: SigmaSchedule,
    /// Also evaluate the target denoiser at each `v^k` to measure `δ_k`.
    pub record_parallel_target: bool,
    pub mode: SolverMode,
    /// Keep every `x^k` and `z^k` (including `k = 0`) in the trace.
    pub keep_iterates: bool,
    /// Start from `s⁰ = γ∇h(z⁰)` instead of `s⁰ = 0`, so the starting pair
    /// already satisfies the z-step optimality condition of the target.
    pub consistent_dual: bool,
}

impl SolverConfig {
    pub fn theory(gamma: f64, sigma: f64) -> Self {
        Self {
            gamma,
            iterations: THEORY_ITERATIONS,
            schedule: SigmaSchedule::Constant(sigma),
            record_parallel_target: true,
            mode: SolverMode::Theory,
            keep_iterates: false,
            consistent_dual: true,
        }
    }

    /// 15 iterations with σ decaying geometrically from `sigma_optim` to 0.01.
    pub fn experiment(gamma: f64, sigma_optim: f64) -> Self {
        Self {
            gamma,
            iterations: EXPERIMENT_ITERATIONS,
            schedule: SigmaSchedule::LogDecay {
                start: sigma_optim,
                end: EXPERIMENT_SIGMA_END,
            },
            record_parallel_target: false,
            mode: SolverMode::Experiment,
            keep_iterates: false,
            consistent_dual: false,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn keeping_iterates(mut self) -> Self {
        self.keep_iterates = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidArgument("iterations must be >= 1".into()));
        }
        self.schedule.validate()?;
        if self.mode == SolverMode::Theory && !matches!(self.schedule, SigmaSchedule::Constant(_)) {
            return Err(Error::InvalidArgument("theory mode needs a constant sigma".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: ImageBuffer,
    pub z: ImageBuffer,
    pub s: ImageBuffer,
    pub k: usize,
}

/// One iteration's record. Metric columns are `None` without ground truth;
/// PSNR values are capped at [`metrics::PSNR_CAP`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub sigma_k: f64,
    pub phi: f64,
    pub grad_f_norm: f64,
    pub delta_k: Option<f64>,
    pub z_step_norm: f64,
    pub xz_gap: f64,
    pub s_step_norm: f64,
    pub psnr: Option<f64>,
    pub psnr_paper_formula: Option<f64>,
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
    pub gamma: f64,
    /// `φ(x⁰, z⁰, s⁰)`
    pub phi0: f64,
    pub final_state: SolverState,
    /// `x^0 … x^K` when `keep_iterates` is set, else empty.
    pub x_history: Vec<ImageBuffer>,
    /// `z^0 … z^K` when `keep_iterates` is set, else empty.
    pub z_history: Vec<ImageBuffer>,
}

impl SolverTrace {
    pub fn x_hat(&self) -> &ImageBuffer {
        &self.final_state.x
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("trace has at least one row")
    }

    pub fn deltas(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.delta_k).collect()
    }
}

fn finite_or_abort(buf: &ImageBuffer, iteration: usize) -> Result<()> {
    if buf.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { iteration })
    }
}

/// Runs the iteration. `target` defines the regularizer `h` used by all
/// diagnostics; the z-step uses `mismatched` when given.
pub fn run(
    fidelity: &dyn DataFidelity,
    target: &Denoiser,
    mismatched: Option<&dyn ZStep>,
    cfg: &SolverConfig,
    ground_truth: Option<&ImageBuffer>,
) -> Result<SolverTrace> {
    cfg.validate()?;
    let total = cfg.iterations;
    let regularizer = |sigma: f64| RegularizerContext::new(target.clone(), cfg.gamma, sigma);

    if cfg.mode == SolverMode::Theory {
        let l = regularizer(sigma_at(cfg.schedule, 1, total))?.lipschitz_default();
        let bound = 1.0 / (4.0 * l);
        if cfg.gamma > bound * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge {
                gamma: cfg.gamma,
                lipschitz: l,
                bound,
            });
        }
    }
    if let Some(gt) = ground_truth {
        gt.ensure_same_shape(&ImageBuffer::zeros(fidelity.signal_shape()), "ground truth vs signal")?;
    }

    let z0 = fidelity.initial_estimate()?;
    let h0 = regularizer(sigma_at(cfg.schedule, 1, total))?;
    let s0 = if cfg.consistent_dual {
        h0.grad(&z0)?.scale(cfg.gamma)
    } else {
        ImageBuffer::zeros(z0.shape())
    };
    let mut state = SolverState {
        x: z0.clone(),
        s: s0,
        z: z0,
        k: 0,
    };
    let phi0 = diagnostics::augmented_lagrangian(fidelity, &h0, &state.x, &state.z, &state.s)?;

    let mut x_history = Vec::new();
    let mut z_history = Vec::new();
    if cfg.keep_iterates {
        x_history.push(state.x.clone());
        z_history.push(state.z.clone());
    }

    let mut rows = Vec::with_capacity(total);
    for k in 1..=total {
        let sigma = sigma_at(cfg.schedule, k, total);
        let h = regularizer(sigma)?;

        let x = fidelity.prox(&state.z.sub(&state.s), cfg.gamma)?;
        finite_or_abort(&x, k)?;
        let v = x.add(&state.s);
        let z = match mismatched {
            Some(step) => step.apply(&v, sigma, k)?,
            None => target.denoise(&v, sigma)?,
        };
        finite_or_abort(&z, k)?;
        let delta_k = if cfg.record_parallel_target {
            Some(match mismatched {
                Some(_) => z.distance(&target.denoise(&v, sigma)?),
                None => 0.0,
            })
        } else {
            None
        };
        let gap = x.sub(&z);
        let s = state.s.add(&gap);
        finite_or_abort(&s, k)?;

        let z_step_norm = z.distance(&state.z);
        let s_step_norm = s.distance(&state.s);
        let phi = diagnostics::augmented_lagrangian(fidelity, &h, &x, &z, &s)?;
        let grad_f_norm = match diagnostics::grad_f(fidelity, &h, &x) {
            Ok(g) => g.norm(),
            Err(Error::OutsideRange { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let (psnr, psnr_paper_formula, ssim) = match ground_truth {
            Some(gt) => (
                Some(metrics::capped(metrics::psnr(&x, gt)?)),
                Some(metrics::capped(metrics::psnr_paper_formula(&x, gt)?)),
                Some(metrics::ssim(&x, gt)?),
            ),
            None => (None, None, None),
        };

        rows.push(TraceRow {
            iter: k,
            sigma_k: sigma,
            phi,
            grad_f_norm,
            delta_k,
            z_step_norm,
            xz_gap: gap.norm(),
            s_step_norm,
            psnr,
            psnr_paper_formula,
            ssim,
        });
        if cfg.keep_iterates {
            x_history.push(x.clone());
            z_history.push(z.clone());
        }
        state = SolverState { x, z, s, k };
    }

    Ok(SolverTrace {
        rows,
        gamma: cfg.gamma,
        phi0,
        final_state: state,
        x_history,
        z_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;
    use crate::operators::{L2Fidelity, MeasurementModel, ProxSolverConfig};
    use crate::priors::AnalyticPrior;

    #[test]
    fn log_decay_endpoints_and_midpoint() {
        let s = SigmaSchedule::LogDecay { start: 0.1, end: 0.01 };
        assert_eq!(sigma_at(s, 1, 15), 0.1);
        assert_eq!(sigma_at(s, 15, 15), 0.01);
        assert!((sigma_at(s, 8, 15) - 0.1 * 10f64.powf(-0.5)).abs() < 1e-15);
        assert_eq!(sigma_at(s, 1, 1), 0.1);
    }

    #[test]
    fn log_decay_is_geometric() {
        let s = SigmaSchedule::LogDecay { start: 0.2, end: 0.01 };
        let ratios: Vec<f64> = (1..14).map(|k| sigma_at(s, k + 1, 15) / sigma_at(s, k, 15)).collect();
        for r in &ratios {
            assert!((r - ratios[0]).abs() < 1e-12);
        }
    }

    fn gaussian_problem() -> (L2Fidelity, Denoiser) {
        let y = ImageBuffer::from_fn(Shape::gray(4, 4), |r, c, _| 0.1 * (r as f64) - 0.05 * c as f64);
        let fid = L2Fidelity::new(MeasurementModel::identity(0.1), y, ProxSolverConfig::default());
        (fid, Denoiser::target(AnalyticPrior::gaussian(0.0, 1.0).unwrap()))
    }

    #[test]
    fn theory_mode_rejects_large_gamma() {
        let (fid, d) = gaussian_problem();
        let cfg = SolverConfig::theory(2.0, 0.6);
        assert!(matches!(run(&fid, &d, None, &cfg, None), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn theory_mode_rejects_decay() {
        let (fid, d) = gaussian_problem();
        let mut cfg = SolverConfig::theory(1.0, 0.5);
        cfg.schedule = SigmaSchedule::LogDecay { start: 0.5, end: 0.1 };
        assert!(run(&fid, &d, None, &cfg, None).is_err());
    }

    #[test]
    fn xz_gap_equals_dual_step() {
        let (fid, d) = gaussian_problem();
        let trace = run(&fid, &d, None, &SolverConfig::theory(1.0, 0.5).with_iterations(30), None).unwrap();
        assert_eq!(trace.rows.len(), 30);
        for r in &trace.rows {
            assert!((r.xz_gap - r.s_step_norm).abs() <= 1e-12);
            assert_eq!(r.delta_k, Some(0.0));
        }
    }

    #[test]
    fn self_mismatch_is_bit_identical() {
        let (fid, d) = gaussian_problem();
        let cfg = SolverConfig::theory(1.0, 0.5).with_iterations(20);
        let a = run(&fid, &d, None, &cfg, None).unwrap();
        let b = run(&fid, &d, Some(&d), &cfg, None).unwrap();
        assert_eq!(a, b);
    }
}
