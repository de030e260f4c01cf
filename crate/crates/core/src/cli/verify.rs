//! Invariant batteries behind `pnp-admm verify <suite>`. Every check yields a
//! [`CheckRecord`], serialized as one JSON object per line.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::adaptation::{DeltaSchedule, PerturbedDenoiser};
use crate::canonical::{self, Instance};
use crate::diagnostics::{check_lemma_descent, check_theorem, estimate_r, metrics, theorem_constants, Theorem};
use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Rng, Shape};
use crate::operators::{prox_data, standard_kernels, Kernel, MeasurementModel, ProxSolverConfig};
use crate::priors::{AnalyticPrior, Component, Denoiser, PriorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Tweedie,
    ProxIdentity,
    LemmaDescent,
    Theorem1,
    Theorem2,
    Remark1,
    Adjoint,
    ProxOracle,
    Metrics,
    All,
}

impl Suite {
    pub const INDIVIDUAL: [Suite; 9] = [
        Suite::Tweedie,
        Suite::ProxIdentity,
        Suite::LemmaDescent,
        Suite::Theorem1,
        Suite::Theorem2,
        Suite::Remark1,
        Suite::Adjoint,
        Suite::ProxOracle,
        Suite::Metrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Tweedie => "tweedie",
            Suite::ProxIdentity => "prox-identity",
            Suite::LemmaDescent => "lemma-descent",
            Suite::Theorem1 => "theorem1",
            Suite::Theorem2 => "theorem2",
            Suite::Remark1 => "remark1",
            Suite::Adjoint => "adjoint",
            Suite::ProxOracle => "prox-oracle",
            Suite::Metrics => "metrics",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::INDIVIDUAL
            .into_iter()
            .chain([Suite::All])
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub suite: &'static str,
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckRecord {
    fn at_most(suite: Suite, check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.name(),
            check: check.into(),
            value,
            tolerance,
            passed: value <= tolerance,
            detail: String::new(),
        }
    }

    fn at_least(suite: Suite, check: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            passed: value >= bound,
            ..Self::at_most(suite, check, value, bound)
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record is serializable")
    }
}

/// Runs one suite (or all of them). `mismatched` selects the mismatched
/// variant of `lemma-descent`; `all` runs both variants.
pub fn run_suite(suite: Suite, mismatched: bool) -> Result<Vec<CheckRecord>> {
    match suite {
        Suite::Tweedie => tweedie(),
        Suite::ProxIdentity => prox_identity(),
        Suite::LemmaDescent => lemma_descent(mismatched),
        Suite::Theorem1 => theorem1(),
        Suite::Theorem2 => theorem2(),
        Suite::Remark1 => remark1(),
        Suite::Adjoint => adjoint(),
        Suite::ProxOracle => prox_oracle(),
        Suite::Metrics => metrics_suite(),
        Suite::All => {
            let mut out = Vec::new();
            for s in Suite::INDIVIDUAL {
                out.extend(run_suite(s, false)?);
                if s == Suite::LemmaDescent {
                    out.extend(run_suite(s, true)?);
                }
            }
            Ok(out)
        }
    }
}

/// Parses `name`, runs it and writes JSON lines to `log`. Returns whether
/// every check passed.
pub fn cmd_verify(name: &str, mismatched: bool, log: &mut dyn std::io::Write) -> Result<bool> {
    let suite: Suite = name.parse()?;
    let records = run_suite(suite, mismatched)?;
    for r in &records {
        writeln!(log, "{}", r.to_json_line()).map_err(|e| Error::io("<verify log>", e))?;
    }
    Ok(records.iter().all(|r| r.passed))
}

/// Priors shared by the denoiser suites: a Gaussian, a symmetric and an
/// asymmetric mixture.
pub fn reference_priors() -> Vec<(&'static str, AnalyticPrior)> {
    let gmm = |c: &[(f64, f64, f64)]| {
        AnalyticPrior::gmm(c.iter().map(|&(w, m, v)| Component::new(w, m, v)).collect())
            .expect("valid mixture")
    };
    vec![
        ("gaussian", AnalyticPrior::gaussian(0.0, 1.0).expect("valid prior")),
        ("gmm-symmetric", gmm(&[(0.5, -2.0, 0.5), (0.5, 2.0, 0.5)])),
        ("gmm-asymmetric", gmm(&[(0.3, -1.0, 0.2), (0.7, 1.5, 1.0)])),
    ]
}

const TWEEDIE_SIGMAS: [f64; 7] = [1e-3, 1e-2, 0.1, 0.5, 1.0, 1.5, 2.0];

fn tweedie() -> Result<Vec<CheckRecord>> {
    let suite = Suite::Tweedie;
    let grid = ImageBuffer::from_fn(Shape::gray(1, 161), |_, c, _| -10.0 + 0.125 * c as f64);
    let mut out = Vec::new();
    for (name, prior) in reference_priors() {
        let d = Denoiser::target(prior.clone());
        for sigma in TWEEDIE_SIGMAS {
            out.push(CheckRecord::at_most(
                suite,
                format!("{name} sigma={sigma} residual"),
                d.tweedie_residual(&grid, sigma)?,
                1e-9,
            ));
            let min_slope = grid
                .as_slice()
                .iter()
                .map(|&u| prior.denoiser_derivative(u, sigma))
                .fold(f64::INFINITY, f64::min);
            out.push(
                CheckRecord::at_least(suite, format!("{name} sigma={sigma} min D'"), min_slope, f64::MIN_POSITIVE)
                    .with_detail("denoiser strictly increasing"),
            );
        }
    }
    Ok(out)
}

fn random_prior(kind: PriorKind, rng: &mut Rng) -> Result<AnalyticPrior> {
    match kind {
        PriorKind::Gaussian => AnalyticPrior::gaussian(rng.uniform(-1.0, 1.0), rng.uniform(0.2, 2.0)),
        PriorKind::Gmm => {
            let n = 2 + rng.below(2);
            let raw: Vec<f64> = (0..n).map(|_| rng.uniform(0.2, 1.0)).collect();
            let total: f64 = raw.iter().sum();
            let comps = raw
                .iter()
                .map(|w| Component::new(w / total, rng.uniform(-2.5, 2.5), rng.uniform(0.1, 1.5)))
                .collect();
            AnalyticPrior::gmm(comps)
        }
    }
}

/// `argmin_y ½(y − u)² + γh(y)` over a grid of step `step` covering the
/// hull of `u` and the component means, which contains `D_σ(u)`.
pub fn brute_force_prox(prior: &AnalyticPrior, sigma: f64, u: f64, step: f64) -> Result<f64> {
    let lo = prior.components().iter().map(|c| c.mean).fold(u, f64::min) - 0.01;
    let hi = prior.components().iter().map(|c| c.mean).fold(u, f64::max) + 0.01;
    let n = ((hi - lo) / step).ceil() as usize + 1;
    let s2 = sigma * sigma;
    let mut best = (f64::INFINITY, lo);
    for i in 0..n {
        let y = lo + step * i as f64;
        let pre = prior.invert_scalar(y, sigma)?;
        let value = 0.5 * (y - u).powi(2) - 0.5 * (y - pre).powi(2) + s2 * prior.noisy_neg_log_density(pre, sigma);
        if value < best.0 {
            best = (value, y);
        }
    }
    Ok(best.1)
}

fn prox_identity() -> Result<Vec<CheckRecord>> {
    let suite = Suite::ProxIdentity;
    let mut rng = Rng::new(7);
    let mut out = Vec::new();
    for kind in [PriorKind::Gaussian, PriorKind::Gmm] {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let prior = random_prior(kind, &mut rng)?;
            let sigma = rng.uniform(0.1, 1.0);
            let u = prior.sample(&mut rng) + sigma * rng.standard_normal();
            let found = brute_force_prox(&prior, sigma, u, 1e-4)?;
            worst = worst.max((found - prior.posterior_mean(u, sigma)).abs());
        }
        out.push(
            CheckRecord::at_most(suite, format!("{kind:?} max |argmin - D(u)|"), worst, 2e-4)
                .with_detail("20 random (prior, sigma, u), grid step 1e-4"),
        );
    }
    Ok(out)
}

fn lemma_descent(mismatched: bool) -> Result<Vec<CheckRecord>> {
    let suite = Suite::LemmaDescent;
    let inst = Instance::gaussian(canonical::SEED)?;
    let shifted = inst.shifted_denoiser(canonical::MISMATCH_SHIFT)?;
    let step: Option<&dyn crate::solver::ZStep> = if mismatched { Some(&shifted) } else { None };
    let trace = inst.run(step, crate::solver::THEORY_ITERATIONS)?;
    let r = if mismatched {
        estimate_r(&trace.z_history, &inst.reference(step)?.z_star)
    } else {
        0.0
    };
    let report = check_lemma_descent(&trace, inst.lipschitz(), inst.gamma, r, mismatched)?;
    let label = if mismatched { "mismatched" } else { "exact" };
    let worst = report
        .rows
        .iter()
        .map(|row| (row.phi - row.bound) / (1.0 + row.phi.abs()))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![CheckRecord::at_most(
        suite,
        format!("{label} descent, max relative excess over {} iterations", report.rows.len()),
        worst,
        crate::diagnostics::INEQUALITY_RTOL,
    )
    .with_detail(format!("{} violations", report.violations().len()))])
}

fn worst_ratio(report: &crate::diagnostics::BoundReport) -> f64 {
    report.rows.iter().map(|r| r.lhs_mean / r.rhs).fold(0.0, f64::max)
}

fn theorem2() -> Result<Vec<CheckRecord>> {
    let suite = Suite::Theorem2;
    let inst = Instance::gaussian(canonical::SEED)?;
    let trace = inst.run(None, crate::solver::THEORY_ITERATIONS)?;
    let reference = inst.reference(None)?;
    let r = estimate_r(&trace.z_history, &reference.z_star);
    let consts = theorem_constants(inst.lipschitz(), inst.gamma, r)?;
    let report = check_theorem(&trace, &consts, Theorem::Exact, reference.phi_star)?;
    let failed = report.rows.iter().filter(|r| !r.satisfied).count();
    Ok(vec![CheckRecord::at_most(suite, "prefixes violating the exact bound", failed as f64, 0.0)
        .with_detail(format!("{} prefixes, max mean/bound {:.4}", report.rows.len(), worst_ratio(&report)))])
}

/// Runs the canonical instance with a perturbed target denoiser.
fn perturbed_run(inst: &Instance, schedule: DeltaSchedule, iterations: usize) -> Result<crate::solver::SolverTrace> {
    let step = PerturbedDenoiser::uniform(inst.target.clone(), schedule);
    inst.run(Some(&step), iterations)
}

pub const DICHOTOMY_ITERATIONS: usize = 500;

fn theorem1() -> Result<Vec<CheckRecord>> {
    let suite = Suite::Theorem1;
    let inst = Instance::gaussian(canonical::SEED)?;
    let shifted = inst.shifted_denoiser(canonical::MISMATCH_SHIFT)?;
    let trace = inst.run(Some(&shifted), crate::solver::THEORY_ITERATIONS)?;
    let reference = inst.reference(Some(&shifted))?;
    let r = estimate_r(&trace.z_history, &reference.z_star);
    let mut out = Vec::new();

    let deltas = trace.deltas().ok_or(Error::MissingDelta)?;
    let per_pixel = (trace.x_hat().len() as f64).sqrt();
    let s2 = inst.sigma * inst.sigma;
    let closed = s2 * canonical::MISMATCH_SHIFT / (canonical::TAU2 + s2);
    let dev = deltas.iter().map(|d| (d / per_pixel - closed).abs()).fold(0.0, f64::max);
    out.push(CheckRecord::at_most(suite, "per-pixel delta vs closed form", dev, 1e-12).with_detail(format!("closed form {closed}")));

    let lemma = check_lemma_descent(&trace, inst.lipschitz(), inst.gamma, r, true)?;
    out.push(CheckRecord::at_most(suite, "mismatched descent violations", lemma.violations().len() as f64, 0.0));

    let consts = theorem_constants(inst.lipschitz(), inst.gamma, r)?;
    let report = check_theorem(&trace, &consts, Theorem::Mismatched, reference.phi_star)?;
    let failed = report.rows.iter().filter(|r| !r.satisfied).count();
    out.push(
        CheckRecord::at_most(suite, "prefixes violating the mismatched bound", failed as f64, 0.0)
            .with_detail(format!("{} prefixes, max mean/bound {:.4}", report.rows.len(), worst_ratio(&report))),
    );

    let summable = perturbed_run(&inst, DeltaSchedule::summable(0.5, 2.0)?, DICHOTOMY_ITERATIONS)?;
    let reached = summable.rows.iter().map(|r| r.grad_f_norm).fold(f64::INFINITY, f64::min);
    out.push(CheckRecord::at_most(suite, "summable delta 0.5/k^2: min grad norm", reached, 1e-4));

    let constant = perturbed_run(&inst, DeltaSchedule::constant(0.5)?, DICHOTOMY_ITERATIONS)?;
    let tail = &constant.rows[DICHOTOMY_ITERATIONS / 2..];
    let plateau = tail.iter().map(|r| r.grad_f_norm).fold(f64::INFINITY, f64::min);
    out.push(
        CheckRecord::at_least(suite, "constant delta 0.5: min grad norm over second half", plateau, 1e-3),
    );
    Ok(out)
}

fn remark1() -> Result<Vec<CheckRecord>> {
    let suite = Suite::Remark1;
    let inst = Instance::gaussian(canonical::SEED)?;
    let trace = perturbed_run(&inst, DeltaSchedule::summable(0.5, 2.0)?, DICHOTOMY_ITERATIONS)?;
    let last = trace.last();
    let identity = trace
        .rows
        .iter()
        .map(|r| (r.s_step_norm - r.xz_gap).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        CheckRecord::at_most(suite, "||z^k - z^{k-1}|| at k=500", last.z_step_norm, 1e-6),
        CheckRecord::at_most(suite, "||x^k - z^k|| at k=500", last.xz_gap, 1e-6),
        CheckRecord::at_most(suite, "||s^k - s^{k-1}|| at k=500", last.s_step_norm, 1e-6),
        CheckRecord::at_most(suite, "max | ||s^k - s^{k-1}|| - ||x^k - z^k|| |", identity, 1e-12),
    ])
}

fn random_image(shape: Shape, rng: &mut Rng) -> ImageBuffer {
    ImageBuffer::from_fn(shape, |_, _, _| rng.standard_normal())
}

fn adjoint() -> Result<Vec<CheckRecord>> {
    let suite = Suite::Adjoint;
    let mut rng = Rng::new(11);
    let shape = Shape::gray(16, 16);
    let mut kernels = vec![("dirac", Kernel::dirac())];
    kernels.extend(standard_kernels());
    let mut out = Vec::new();
    for (name, kernel) in kernels {
        for scale in [1, 2, 4] {
            let model = MeasurementModel::new(kernel.clone(), scale, 0.0)?;
            let x = random_image(shape, &mut rng);
            let y = random_image(model.measurement_shape(shape)?, &mut rng);
            let ax = model.forward(&x)?;
            let aty = model.adjoint(&y, shape)?;
            let gap = (ax.dot(&y) - x.dot(&aty)).abs() / (ax.norm() * y.norm()).max(f64::MIN_POSITIVE);
            out.push(CheckRecord::at_most(suite, format!("{name} s={scale} |<Ax,y> - <x,A^T y>| / (|Ax||y|)"), gap, 1e-12));
        }
    }
    Ok(out)
}

fn prox_oracle() -> Result<Vec<CheckRecord>> {
    let suite = Suite::ProxOracle;
    let mut rng = Rng::new(13);
    let shape = Shape::gray(16, 16);
    let cg = ProxSolverConfig::conjugate_gradient(1e-12, 5000);
    let mut out = Vec::new();
    for std in [0.8, 1.6, 2.4] {
        for scale in [2, 4] {
            let model = MeasurementModel::new(Kernel::gaussian(std)?, scale, 0.01)?;
            let y = random_image(model.measurement_shape(shape)?, &mut rng);
            let v = random_image(shape, &mut rng);
            for gamma in [0.1, 1.0] {
                let fft = prox_data(&model, &y, &v, gamma, &ProxSolverConfig::default())?;
                let reference = prox_data(&model, &y, &v, gamma, &cg)?;
                out.push(CheckRecord::at_most(
                    suite,
                    format!("gaussian std={std} s={scale} gamma={gamma} relative FFT-CG gap"),
                    fft.distance(&reference) / reference.norm(),
                    1e-8,
                ));
            }
        }
    }
    Ok(out)
}

fn metrics_suite() -> Result<Vec<CheckRecord>> {
    let suite = Suite::Metrics;
    let mut rng = Rng::new(17);
    let shape = Shape::gray(24, 24);
    let x = ImageBuffer::from_fn(shape, |_, _, _| rng.uniform(0.0, 1.0));
    let offset = x.map(|t| t + 0.01);
    let noisy = x.add(&random_image(shape, &mut rng).scale(0.05));
    let n = shape.len() as f64;
    let psnr = metrics::psnr(&offset, &x)?;
    let unnormalized = metrics::psnr_paper_formula(&noisy, &x)?;
    let ssim_ab = metrics::ssim(&noisy, &x)?;
    let ssim_ba = metrics::ssim(&x, &noisy)?;
    Ok(vec![
        CheckRecord::at_most(suite, "psnr of a uniform 0.01 offset vs 40 dB", (psnr - 40.0).abs(), 1e-10),
        CheckRecord::at_most(
            suite,
            "per-pixel psnr - unnormalized psnr vs 10 log10(n)",
            (metrics::psnr(&noisy, &x)? - unnormalized - 10.0 * n.log10()).abs(),
            1e-10,
        ),
        CheckRecord::at_most(suite, "|ssim(x, x) - 1|", (metrics::ssim(&x, &x)? - 1.0).abs(), 1e-12),
        CheckRecord::at_most(suite, "ssim asymmetry", (ssim_ab - ssim_ba).abs(), 1e-12),
        CheckRecord::at_most(suite, "ssim of a noisy copy", ssim_ab, 1.0 - 1e-3),
        CheckRecord::at_least(
            suite,
            "capped psnr of identical images",
            metrics::capped(metrics::psnr(&x, &x)?),
            metrics::PSNR_CAP,
        ),
    ])
}
