//! Prior interpolation (a parameter-space stand-in for fine-tuning a
//! denoiser toward the target distribution) and denoisers with a scheduled,
//! exactly known distance `δ_k` from the target.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::priors::{AnalyticPrior, Component, Denoiser, PriorKind};
use crate::solver::ZStep;

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationPath {
    pub source: AnalyticPrior,
    pub target: AnalyticPrior,
    pub alphas: Vec<f64>,
}

impl AdaptationPath {
    pub fn new(source: AnalyticPrior, target: AnalyticPrior, alphas: Vec<f64>) -> Result<Self> {
        if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument("alphas must lie in [0, 1]".into()));
        }
        if alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("alphas must be strictly increasing".into()));
        }
        Ok(Self {
            source,
            target,
            alphas,
        })
    }

    /// The path over `{0, 0.25, 0.5, 0.75, 1}`.
    pub fn quarters(source: AnalyticPrior, target: AnalyticPrior) -> Self {
        Self::new(source, target, vec![0.0, 0.25, 0.5, 0.75, 1.0]).expect("valid alphas")
    }

    pub fn priors(&self) -> Result<Vec<(f64, AnalyticPrior)>> {
        self.alphas
            .iter()
            .map(|&a| Ok((a, interpolate_prior(self, a)?)))
            .collect()
    }
}

/// Splits the heaviest component in two until the prior has `n` components.
fn pad(prior: &AnalyticPrior, n: usize) -> Vec<Component> {
    let mut comps = prior.components().to_vec();
    while comps.len() < n {
        let (i, _) = comps
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.weight.total_cmp(&b.1.weight))
            .expect("prior is non-empty");
        comps[i].weight *= 0.5;
        let twin = comps[i];
        comps.insert(i + 1, twin);
    }
    comps
}

/// Componentwise interpolation: means and log-variances linearly, weights
/// linearly then renormalized. Components are paired in mean order after
/// padding the shorter list. `α = 0` and `α = 1` return the endpoints.
pub fn interpolate_prior(path: &AdaptationPath, alpha: f64) -> Result<AnalyticPrior> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    if alpha == 0.0 {
        return Ok(path.source.clone());
    }
    if alpha == 1.0 {
        return Ok(path.target.clone());
    }
    let n = path.source.components().len().max(path.target.components().len());
    let mut src = pad(&path.source, n);
    let mut tgt = pad(&path.target, n);
    src.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    tgt.sort_by(|a, b| a.mean.total_cmp(&b.mean));

    let lerp = |a: f64, b: f64| (1.0 - alpha) * a + alpha * b;
    let mut comps: Vec<Component> = src
        .iter()
        .zip(&tgt)
        .map(|(s, t)| Component {
            weight: lerp(s.weight, t.weight),
            mean: lerp(s.mean, t.mean),
            variance: lerp(s.variance.ln(), t.variance.ln()).exp(),
        })
        .collect();
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    comps.iter_mut().for_each(|c| c.weight /= total);

    if n == 1 && path.source.kind() == PriorKind::Gaussian && path.target.kind() == PriorKind::Gaussian {
        AnalyticPrior::gaussian(comps[0].mean, comps[0].variance)
    } else {
        AnalyticPrior::gmm(comps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaSchedule {
    /// `δ_k = c/k^p`, `p > 1`.
    Summable { c: f64, p: f64 },
    /// `δ_k = c/k^p`, `p ≤ 1`.
    NonSummable { c: f64, p: f64 },
    Constant(f64),
}

impl DeltaSchedule {
    pub fn summable(c: f64, p: f64) -> Result<Self> {
        if !(c >= 0.0) || !(p > 1.0) {
            return Err(Error::InvalidArgument(format!("summable schedule needs c >= 0, p > 1 (c = {c}, p = {p})")));
        }
        Ok(Self::Summable { c, p })
    }

    pub fn non_summable(c: f64, p: f64) -> Result<Self> {
        if !(c >= 0.0) || !(p <= 1.0) {
            return Err(Error::InvalidArgument(format!("non-summable schedule needs c >= 0, p <= 1 (c = {c}, p = {p})")));
        }
        Ok(Self::NonSummable { c, p })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::InvalidArgument(format!("constant schedule needs c >= 0, got {c}")));
        }
        Ok(Self::Constant(c))
    }

    /// `δ_k` for `k ≥ 1`.
    pub fn delta(&self, k: usize) -> f64 {
        match *self {
            Self::Summable { c, p } | Self::NonSummable { c, p } => c / (k.max(1) as f64).powf(p),
            Self::Constant(c) => c,
        }
    }
}

/// `D̂_σ(v) = D_σ(v) + δ_k·d` for a fixed unit direction `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedDenoiser {
    target: Denoiser,
    schedule: DeltaSchedule,
    direction: Option<ImageBuffer>,
}

impl PerturbedDenoiser {
    pub fn new(target: Denoiser, schedule: DeltaSchedule, direction: ImageBuffer) -> Result<Self> {
        let norm = direction.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("direction must have unit norm, has {norm}")));
        }
        Ok(Self {
            target,
            schedule,
            direction: Some(direction),
        })
    }

    /// Uses the constant direction `1/√n` of whatever shape is denoised.
    pub fn uniform(target: Denoiser, schedule: DeltaSchedule) -> Self {
        Self {
            target,
            schedule,
            direction: None,
        }
    }

    pub fn schedule(&self) -> DeltaSchedule {
        self.schedule
    }

    pub fn target(&self) -> &Denoiser {
        &self.target
    }
}

impl ZStep for PerturbedDenoiser {
    fn apply(&self, v: &ImageBuffer, sigma: f64, k: usize) -> Result<ImageBuffer> {
        let mut out = self.target.denoise(v, sigma)?;
        let delta = self.schedule.delta(k);
        if delta == 0.0 {
            return Ok(out);
        }
        match &self.direction {
            Some(d) => {
                out.ensure_same_shape(d, "perturbation direction")?;
                out.axpy(delta, d);
            }
            None => {
                let step = delta / (out.len() as f64).sqrt();
                out.as_mut_slice().iter_mut().for_each(|t| *t += step);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Shape;

    fn gauss(m: f64, v: f64) -> AnalyticPrior {
        AnalyticPrior::gaussian(m, v).unwrap()
    }

    #[test]
    fn endpoints_are_exact() {
        let path = AdaptationPath::quarters(gauss(0.3, 0.7), gauss(-1.0, 2.0));
        assert_eq!(interpolate_prior(&path, 0.0).unwrap(), path.source);
        assert_eq!(interpolate_prior(&path, 1.0).unwrap(), path.target);
    }

    #[test]
    fn mean_is_linear() {
        let path = AdaptationPath::quarters(gauss(0.0, 1.0), gauss(1.0, 1.0));
        let p = interpolate_prior(&path, 0.25).unwrap();
        assert_eq!(p.kind(), PriorKind::Gaussian);
        assert!((p.components()[0].mean - 0.25).abs() < 1e-15);
        assert!((p.components()[0].variance - 1.0).abs() < 1e-15);
    }

    #[test]
    fn padding_mixes_gaussian_with_gmm() {
        let gmm = AnalyticPrior::gmm(vec![
            Component::new(0.2, -1.0, 0.5),
            Component::new(0.5, 0.0, 1.0),
            Component::new(0.3, 2.0, 0.3),
        ])
        .unwrap();
        let path = AdaptationPath::quarters(gauss(0.0, 1.0), gmm);
        let p = interpolate_prior(&path, 0.5).unwrap();
        assert_eq!(p.components().len(), 3);
        let w: f64 = p.components().iter().map(|c| c.weight).sum();
        assert!((w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alphas_must_increase() {
        assert!(AdaptationPath::new(gauss(0.0, 1.0), gauss(1.0, 1.0), vec![0.5, 0.5]).is_err());
        assert!(AdaptationPath::new(gauss(0.0, 1.0), gauss(1.0, 1.0), vec![0.0, 1.5]).is_err());
    }

    #[test]
    fn schedules() {
        assert!((DeltaSchedule::summable(1.0, 2.0).unwrap().delta(3) - 1.0 / 9.0).abs() < 1e-16);
        assert!(DeltaSchedule::summable(1.0, 1.0).is_err());
        assert!(DeltaSchedule::non_summable(1.0, 1.5).is_err());
        assert_eq!(DeltaSchedule::constant(0.5).unwrap().delta(1000), 0.5);
    }

    #[test]
    fn realized_delta_matches_schedule() {
        let d = Denoiser::target(gauss(0.0, 1.0));
        let pd = PerturbedDenoiser::uniform(d.clone(), DeltaSchedule::summable(0.5, 2.0).unwrap());
        let v = ImageBuffer::from_fn(Shape::gray(5, 7), |r, c, _| r as f64 * 0.1 - c as f64 * 0.2);
        for k in 1..20 {
            let dist = pd.apply(&v, 0.5, k).unwrap().distance(&d.denoise(&v, 0.5).unwrap());
            assert!((dist - 0.5 / (k * k) as f64).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_schedule_is_target() {
        let d = Denoiser::target(gauss(0.0, 1.0));
        let pd = PerturbedDenoiser::uniform(d.clone(), DeltaSchedule::constant(0.0).unwrap());
        let v = ImageBuffer::filled(Shape::gray(3, 3), 0.7);
        assert_eq!(pd.apply(&v, 0.3, 4).unwrap(), d.denoise(&v, 0.3).unwrap());
    }

    #[test]
    fn direction_must_be_unit() {
        let d = Denoiser::target(gauss(0.0, 1.0));
        let dir = ImageBuffer::filled(Shape::gray(2, 2), 1.0);
        assert!(PerturbedDenoiser::new(d.clone(), DeltaSchedule::Constant(0.1), dir.clone()).is_err());
        assert!(PerturbedDenoiser::new(d, DeltaSchedule::Constant(0.1), dir.scale(0.5)).is_ok());
    }
}
