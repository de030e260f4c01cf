//! Separable analytic priors and their exact MMSE denoisers.
//!
//! Every pixel is drawn i.i.d. from a Gaussian mixture with components
//! `(w_i, μ_i, τ_i²)`. Under AWGN of level σ the noisy density is again a
//! mixture with variances `v_i = τ_i² + σ²`, so the denoiser, the score of
//! the noisy density, its derivative, and the implicit regularizer for
//! which the denoiser is a proximal map are all available in closed form
//! (up to a scalar monotone inversion).
//!
//! Scalar quantities per pixel, with responsibilities `r_i(u) ∝ w_i N(u; μ_i, v_i)`
//! and `a_i = (u − μ_i)/v_i`:
//!
//! | quantity | formula |
//! |---|---|
//! | `−log p_u(u)` | `−logsumexp_i(log w_i + log N(u; μ_i, v_i))` |
//! | score derivative `h_σ'(u)` | `Σ r_i a_i` |
//! | denoiser `D(u)` | `Σ r_i (τ_i² u + σ² μ_i)/v_i` |
//! | `D'(u)` | `Σ r_i τ_i²/v_i + σ² Var_r(a)` (strictly positive) |

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Rng, Shape};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Newton inversion settings for the scalar denoiser map.
pub const INVERSION_MAX_ITER: usize = 200;
pub const INVERSION_TOL: f64 = 1e-12;

/// Applied to sampled GMM Lipschitz estimates, which have no closed form.
pub const GMM_LIPSCHITZ_SAFETY: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl Component {
    pub const fn new(weight: f64, mean: f64, variance: f64) -> Self {
        Self {
            weight,
            mean,
            variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Gaussian,
    Gmm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPrior {
    kind: PriorKind,
    components: Vec<Component>,
}

/// Per-pixel sufficient statistics of the noisy mixture at one input.
#[derive(Debug, Clone, Copy)]
struct NoisyStats {
    neg_log_density: f64,
    score: f64,
    mean: f64,
    derivative: f64,
}

impl AnalyticPrior {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        let p = Self {
            kind: PriorKind::Gaussian,
            components: vec![Component::new(1.0, mean, variance)],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn gmm(components: Vec<Component>) -> Result<Self> {
        let p = Self {
            kind: PriorKind::Gmm,
            components,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn new(kind: PriorKind, components: Vec<Component>) -> Result<Self> {
        match kind {
            PriorKind::Gaussian => {
                if components.len() != 1 {
                    return Err(Error::InvalidArgument(
                        "a gaussian prior has exactly one component".into(),
                    ));
                }
                let c = components[0];
                Self::gaussian(c.mean, c.variance)
            }
            PriorKind::Gmm => Self::gmm(components),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidArgument("prior needs at least one component".into()));
        }
        let mut total = 0.0;
        for c in &self.components {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return Err(Error::InvalidArgument(format!("weight {} must be > 0", c.weight)));
            }
            if !(c.variance > 0.0) || !c.variance.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "variance {} must be > 0 (degenerate prior)",
                    c.variance
                )));
            }
            if !c.mean.is_finite() {
                return Err(Error::InvalidArgument("component mean must be finite".into()));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn is_symmetric(&self) -> bool {
        self.components.iter().all(|c| {
            self.components.iter().any(|d| {
                (d.mean + c.mean).abs() < 1e-15
                    && d.weight == c.weight
                    && d.variance == c.variance
            })
        })
    }

    /// Prior density at a scalar `x` (no smoothing).
    pub fn density(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * (-(x - c.mean).powi(2) / (2.0 * c.variance)).exp() / (2.0 * std::f64::consts::PI * c.variance).sqrt())
            .sum()
    }

    fn stats(&self, u: f64, s2: f64) -> NoisyStats {
        let log_term = |c: &Component| {
            let v = c.variance + s2;
            c.weight.ln() - 0.5 * (LN_2PI + v.ln()) - (u - c.mean).powi(2) / (2.0 * v)
        };
        let max = self
            .components
            .iter()
            .map(log_term)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut score, mut mean, mut shrink) = (0.0, 0.0, 0.0, 0.0);
        for c in &self.components {
            let v = c.variance + s2;
            let r = (log_term(c) - max).exp();
            z += r;
            score += r * (u - c.mean) / v;
            mean += r * (c.variance * u + s2 * c.mean) / v;
            shrink += r * c.variance / v;
        }
        let score = score / z;
        let mut spread = 0.0;
        if self.components.len() > 1 {
            for c in &self.components {
                let v = c.variance + s2;
                let r = (log_term(c) - max).exp();
                spread += r * ((u - c.mean) / v - score).powi(2);
            }
            spread /= z;
        }
        NoisyStats {
            neg_log_density: -(max + z.ln()),
            score,
            mean: mean / z,
            derivative: shrink / z + s2 * spread,
        }
    }

    /// Scalar MMSE estimate `E[x | x + e = v]`, `e ~ N(0, σ²)`.
    pub fn posterior_mean(&self, v: f64, sigma: f64) -> f64 {
        self.stats(v, sigma * sigma).mean
    }

    /// Scalar `−log p_u(u)` of the Gaussian-smoothed prior.
    pub fn noisy_neg_log_density(&self, u: f64, sigma: f64) -> f64 {
        self.stats(u, sigma * sigma).neg_log_density
    }

    /// Scalar derivative of `−log p_u`.
    pub fn noisy_score(&self, u: f64, sigma: f64) -> f64 {
        self.stats(u, sigma * sigma).score
    }

    /// Scalar derivative of the denoiser, `1 − σ² (−log p_u)''`.
    pub fn denoiser_derivative(&self, u: f64, sigma: f64) -> f64 {
        self.stats(u, sigma * sigma).derivative
    }

    /// Solves `D(u) = x` for `u`.
    pub fn invert_scalar(&self, x: f64, sigma: f64) -> Result<f64> {
        let s2 = sigma * sigma;
        if self.kind == PriorKind::Gaussian {
            let c = self.components[0];
            return Ok(((c.variance + s2) * x - s2 * c.mean) / c.variance);
        }
        if !x.is_finite() {
            return Err(Error::OutsideRange {
                value: x,
                iterations: 0,
                residual: f64::NAN,
            });
        }
        let tol = INVERSION_TOL * x.abs().max(1.0);
        let mut u = x;
        let mut st = self.stats(u, s2);
        let mut res = st.mean - x;
        for it in 0..INVERSION_MAX_ITER {
            if res.abs() <= tol {
                return Ok(u);
            }
            let step = res / st.derivative;
            let mut t = 1.0;
            loop {
                let cand = u - t * step;
                let cst = self.stats(cand, s2);
                let cres = cst.mean - x;
                if cres.abs() < res.abs() {
                    u = cand;
                    st = cst;
                    res = cres;
                    break;
                }
                t *= 0.5;
                if t < 1e-12 {
                    return Err(Error::OutsideRange {
                        value: x,
                        iterations: it + 1,
                        residual: res.abs(),
                    });
                }
            }
        }
        if res.abs() <= tol {
            Ok(u)
        } else {
            Err(Error::OutsideRange {
                value: x,
                iterations: INVERSION_MAX_ITER,
                residual: res.abs(),
            })
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let mut pick = rng.uniform(0.0, 1.0);
        let mut chosen = self.components[self.components.len() - 1];
        for c in &self.components {
            if pick < c.weight {
                chosen = *c;
                break;
            }
            pick -= c.weight;
        }
        chosen.mean + chosen.variance.sqrt() * rng.standard_normal()
    }

    /// Image with pixels drawn i.i.d. from the prior.
    pub fn sample_image(&self, shape: Shape, rng: &mut Rng) -> ImageBuffer {
        let data = (0..shape.len()).map(|_| self.sample(rng)).collect();
        ImageBuffer::from_vec(shape, data).expect("length matches shape")
    }

    /// Mean and variance of the prior (used to size default sampling boxes).
    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self.components.iter().map(|c| c.weight * c.mean).sum();
        let second: f64 = self
            .components
            .iter()
            .map(|c| c.weight * (c.variance + c.mean * c.mean))
            .sum();
        (mean, second - mean * mean)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DenoiserRole {
    Target,
    Mismatched,
}

/// MMSE denoiser of an analytic prior, applied pixelwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    prior: AnalyticPrior,
    role: DenoiserRole,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("sigma must be > 0, got {sigma}")))
    }
}

impl Denoiser {
    pub fn new(prior: AnalyticPrior, role: DenoiserRole) -> Self {
        Self { prior, role }
    }

    pub fn target(prior: AnalyticPrior) -> Self {
        Self::new(prior, DenoiserRole::Target)
    }

    pub fn mismatched(prior: AnalyticPrior) -> Self {
        Self::new(prior, DenoiserRole::Mismatched)
    }

    pub fn prior(&self) -> &AnalyticPrior {
        &self.prior
    }

    pub fn role(&self) -> DenoiserRole {
        self.role
    }

    pub fn denoise(&self, v: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
        check_sigma(sigma)?;
        Ok(v.map(|t| self.prior.posterior_mean(t, sigma)))
    }

    /// `h_σ(u) = −log p_u(u)`, summed over pixels.
    pub fn neg_log_noisy_density(&self, u: &ImageBuffer, sigma: f64) -> Result<f64> {
        check_sigma(sigma)?;
        Ok(u.as_slice()
            .iter()
            .map(|&t| self.prior.noisy_neg_log_density(t, sigma))
            .sum())
    }

    /// `∇h_σ(u)`.
    pub fn grad_neg_log_noisy_density(&self, u: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
        check_sigma(sigma)?;
        Ok(u.map(|t| self.prior.noisy_score(t, sigma)))
    }

    /// `‖D_σ(u) − (u − σ² ∇h_σ(u))‖_∞`
    pub fn tweedie_residual(&self, u: &ImageBuffer, sigma: f64) -> Result<f64> {
        let d = self.denoise(u, sigma)?;
        let score = self.grad_neg_log_noisy_density(u, sigma)?;
        let s2 = sigma * sigma;
        Ok(d.as_slice()
            .iter()
            .zip(u.as_slice())
            .zip(score.as_slice())
            .map(|((&d, &u), &g)| (d - (u - s2 * g)).abs())
            .fold(0.0, f64::max))
    }

    /// Pixelwise `D_σ⁻¹(x)`.
    pub fn invert(&self, x: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
        check_sigma(sigma)?;
        let data = x
            .as_slice()
            .iter()
            .map(|&t| self.prior.invert_scalar(t, sigma))
            .collect::<Result<Vec<_>>>()?;
        ImageBuffer::from_vec(x.shape(), data)
    }

    /// Realized distance `‖D̂_σ(v) − D_σ(v)‖₂` between two denoisers.
    pub fn distance(&self, other: &Denoiser, v: &ImageBuffer, sigma: f64) -> Result<f64> {
        Ok(self.denoise(v, sigma)?.distance(&other.denoise(v, sigma)?))
    }
}

/// `‖D̂_σ(v) − D_σ(v)‖₂`
pub fn denoiser_distance(
    target: &Denoiser,
    mismatched: &Denoiser,
    v: &ImageBuffer,
    sigma: f64,
) -> Result<f64> {
    mismatched.distance(target, v, sigma)
}

/// Box of noisy inputs `u ∈ [lo, hi]` whose images `D_σ(u)` are used to
/// sample the range of the denoiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub lo: f64,
    pub hi: f64,
}

impl SampleBox {
    /// Prior mean ± 8 noisy standard deviations.
    pub fn around(prior: &AnalyticPrior, sigma: f64) -> Self {
        let lo = prior
            .components()
            .iter()
            .map(|c| c.mean - 8.0 * (c.variance + sigma * sigma).sqrt())
            .fold(f64::INFINITY, f64::min);
        let hi = prior
            .components()
            .iter()
            .map(|c| c.mean + 8.0 * (c.variance + sigma * sigma).sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        Self { lo, hi }
    }

    pub fn grid(&self, n: usize) -> impl Iterator<Item = f64> + '_ {
        let step = if n > 1 { (self.hi - self.lo) / (n - 1) as f64 } else { 0.0 };
        (0..n).map(move |i| self.lo + step * i as f64)
    }
}

/// The implicit regularizer `h` tied to a denoiser at fixed `(γ, σ)`:
///
/// `h(x) = −(1/2γ)‖x − D⁻¹(x)‖² + (σ²/γ) h_σ(D⁻¹(x))` on the range of `D`,
/// `+∞` elsewhere. Its gradient is `(D⁻¹(x) − x)/γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizerContext {
    denoiser: Denoiser,
    gamma: f64,
    sigma: f64,
}

impl RegularizerContext {
    pub fn new(denoiser: Denoiser, gamma: f64, sigma: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be > 0, got {gamma}")));
        }
        check_sigma(sigma)?;
        Ok(Self {
            denoiser,
            gamma,
            sigma,
        })
    }

    pub fn denoiser(&self) -> &Denoiser {
        &self.denoiser
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.denoiser.clone(), self.gamma, sigma)
    }

    fn scalar_value(&self, x: f64) -> Result<f64> {
        let prior = self.denoiser.prior();
        let u = prior.invert_scalar(x, self.sigma)?;
        let s2 = self.sigma * self.sigma;
        Ok(-(x - u).powi(2) / (2.0 * self.gamma)
            + s2 / self.gamma * prior.noisy_neg_log_density(u, self.sigma))
    }

    /// `h(x)`; `Err(OutsideRange)` where `h = +∞`.
    pub fn value(&self, x: &ImageBuffer) -> Result<f64> {
        x.as_slice().iter().map(|&t| self.scalar_value(t)).sum()
    }

    /// `∇h(x) = (D⁻¹(x) − x)/γ`
    pub fn grad(&self, x: &ImageBuffer) -> Result<ImageBuffer> {
        let u = self.denoiser.invert(x, self.sigma)?;
        Ok(u.sub(x).scale(1.0 / self.gamma))
    }

    /// Largest sampled `|d/dx ∇h|` over range points `D(u)`, `u` on a grid
    /// of `n_samples` points in `domain`. Uses `(1/D'(u) − 1)/γ`.
    pub fn lipschitz_sampled(&self, domain: SampleBox, n_samples: usize) -> f64 {
        let prior = self.denoiser.prior();
        domain
            .grid(n_samples.max(1))
            .map(|u| (1.0 / prior.denoiser_derivative(u, self.sigma) - 1.0).abs() / self.gamma)
            .fold(0.0, f64::max)
    }

    /// Lipschitz constant of `∇h` over the denoiser range: exact
    /// `σ²/(γτ²)` for a Gaussian prior, sampled estimate times
    /// [`GMM_LIPSCHITZ_SAFETY`] for a mixture.
    pub fn lipschitz(&self, domain: SampleBox, n_samples: usize) -> f64 {
        let prior = self.denoiser.prior();
        match prior.kind() {
            PriorKind::Gaussian => {
                self.sigma * self.sigma / (self.gamma * prior.components()[0].variance)
            }
            PriorKind::Gmm => GMM_LIPSCHITZ_SAFETY * self.lipschitz_sampled(domain, n_samples),
        }
    }

    /// Lipschitz constant over the default sampling box.
    pub fn lipschitz_default(&self) -> f64 {
        self.lipschitz(SampleBox::around(self.denoiser.prior(), self.sigma), 4001)
    }
}
