//! Experiment configuration (TOML).
//!
//! ```toml
//! seed = 7
//! output_dir = "out"              # optional; --out and PNP_OUT_DIR override
//!
//! [problem]
//! kind = "synthetic"              # or "image"
//! height = 16
//! width = 16
//! channels = 1
//! # kind = "image": ground_truth and/or degraded (PGM/PPM paths)
//!
//! [measurement]
//! kernel = "dirac"                # "gaussian:<std>", a standard kernel name, or a file
//! scale = 1
//! noise_sigma = 0.1
//!
//! [prior.target]
//! kind = "gaussian"
//! components = [[1.0, 0.0, 1.0]]  # (weight, mean, variance)
//!
//! [prior.mismatched]              # optional, same shape as [prior.target]
//!
//! [adaptation]                    # optional
//! alpha = 0.5                     # interpolate mismatched -> target
//! delta = "summable"              # or "non_summable", "constant": perturb the target
//! delta_c = 0.5
//! delta_p = 2.0
//!
//! [solver]
//! mode = "theory"                 # or "experiment"
//! gamma = 0.5
//! iterations = 200
//! sigma = 0.5                     # theory mode / constant schedule
//! sigma_start = 0.1               # experiment mode (log decay to sigma_end)
//! sigma_end = 0.01
//! record_parallel_target = true
//! prox = "fft"                    # or "cg"
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::adaptation::{interpolate_prior, AdaptationPath, DeltaSchedule, PerturbedDenoiser};
use crate::error::{Error, Result};
use crate::image::{gaussian_noise, ImageBuffer, Rng, Shape};
use crate::operators::{standard_kernels, Kernel, L2Fidelity, MeasurementModel, ProxMethod, ProxSolverConfig};
use crate::pnm::read_image;
use crate::priors::{AnalyticPrior, Component, Denoiser, PriorKind};
use crate::solver::{SigmaSchedule, SolverConfig, SolverMode, ZStep, EXPERIMENT_ITERATIONS, EXPERIMENT_SIGMA_END, THEORY_ITERATIONS};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub measurement: MeasurementSpec,
    pub prior: PriorSection,
    pub adaptation: Option<AdaptationSpec>,
    pub solver: SolverSpec,
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// The config text as read, echoed into run summaries.
    #[serde(skip)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Synthetic {
        height: usize,
        width: usize,
        #[serde(default = "one")]
        channels: usize,
    },
    Image {
        ground_truth: Option<PathBuf>,
        degraded: Option<PathBuf>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    #[serde(default = "dirac")]
    pub kernel: String,
    #[serde(default = "one")]
    pub scale: usize,
    #[serde(default)]
    pub noise_sigma: f64,
}

fn dirac() -> String {
    "dirac".into()
}

impl Default for MeasurementSpec {
    fn default() -> Self {
        Self {
            kernel: dirac(),
            scale: 1,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub target: PriorSpec,
    pub mismatched: Option<PriorSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub kind: String,
    pub components: Vec<[f64; 3]>,
}

impl PriorSpec {
    pub fn build(&self) -> Result<AnalyticPrior> {
        let kind = match self.kind.as_str() {
            "gaussian" => PriorKind::Gaussian,
            "gmm" => PriorKind::Gmm,
            other => return Err(Error::InvalidArgument(format!("unknown prior kind `{other}`"))),
        };
        let comps = self
            .components
            .iter()
            .map(|&[w, m, v]| Component::new(w, m, v))
            .collect();
        AnalyticPrior::new(kind, comps)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationSpec {
    pub alpha: Option<f64>,
    pub delta: Option<String>,
    #[serde(default)]
    pub delta_c: f64,
    #[serde(default = "two")]
    pub delta_p: f64,
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "theory")]
    pub mode: String,
    pub gamma: f64,
    pub iterations: Option<usize>,
    pub sigma: Option<f64>,
    pub sigma_start: Option<f64>,
    pub sigma_end: Option<f64>,
    pub record_parallel_target: Option<bool>,
    #[serde(default = "fft")]
    pub prox: String,
}

fn theory() -> String {
    "theory".into()
}

fn fft() -> String {
    "fft".into()
}

/// Everything needed for one solver run.
pub struct Problem {
    pub fidelity: L2Fidelity,
    pub target: Denoiser,
    pub z_step: Option<Box<dyn ZStep>>,
    pub solver: SolverConfig,
    pub ground_truth: Option<ImageBuffer>,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.source = text.to_string();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn config_error(&self, message: impl Into<String>) -> Error {
        Error::Config {
            path: self.base_dir.clone(),
            message: message.into(),
        }
    }

    pub fn kernel(&self) -> Result<Kernel> {
        let spec = self.measurement.kernel.trim();
        if spec == "dirac" {
            return Ok(Kernel::dirac());
        }
        if let Some(std) = spec.strip_prefix("gaussian:") {
            let std: f64 = std
                .parse()
                .map_err(|_| self.config_error(format!("measurement.kernel: bad std in `{spec}`")))?;
            return Kernel::gaussian(std);
        }
        if let Some((_, k)) = standard_kernels().into_iter().find(|(n, _)| *n == spec) {
            return Ok(k);
        }
        Kernel::load(self.resolve(Path::new(spec)))
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = &self.solver;
        let mut cfg = match s.mode.as_str() {
            "theory" => {
                let sigma = s
                    .sigma
                    .ok_or_else(|| self.config_error("solver.sigma is required in theory mode"))?;
                SolverConfig::theory(s.gamma, sigma)
            }
            "experiment" => {
                let start = s.sigma_start.or(s.sigma).ok_or_else(|| {
                    self.config_error("solver.sigma_start is required in experiment mode")
                })?;
                let mut c = SolverConfig::experiment(s.gamma, start);
                c.schedule = SigmaSchedule::LogDecay {
                    start,
                    end: s.sigma_end.unwrap_or(EXPERIMENT_SIGMA_END),
                };
                c
            }
            other => return Err(self.config_error(format!("solver.mode: unknown mode `{other}`"))),
        };
        cfg.iterations = s.iterations.unwrap_or(match cfg.mode {
            SolverMode::Theory => THEORY_ITERATIONS,
            SolverMode::Experiment => EXPERIMENT_ITERATIONS,
        });
        if let Some(flag) = s.record_parallel_target {
            cfg.record_parallel_target = flag;
        }
        Ok(cfg)
    }

    fn prox_config(&self) -> Result<ProxSolverConfig> {
        let method = match self.solver.prox.as_str() {
            "fft" => ProxMethod::ClosedFormFft,
            "cg" => ProxMethod::ConjugateGradient,
            other => return Err(self.config_error(format!("solver.prox: unknown method `{other}`"))),
        };
        Ok(ProxSolverConfig {
            method,
            ..ProxSolverConfig::default()
        })
    }

    fn z_step(&self, target: &Denoiser) -> Result<Option<Box<dyn ZStep>>> {
        let mismatched = self.prior.mismatched.as_ref().map(PriorSpec::build).transpose()?;
        let adaptation = self.adaptation.as_ref();
        if let Some(kind) = adaptation.and_then(|a| a.delta.as_deref()) {
            let a = adaptation.expect("checked above");
            let schedule = match kind {
                "summable" => DeltaSchedule::summable(a.delta_c, a.delta_p)?,
                "non_summable" => DeltaSchedule::non_summable(a.delta_c, a.delta_p)?,
                "constant" => DeltaSchedule::constant(a.delta_c)?,
                other => return Err(self.config_error(format!("adaptation.delta: unknown schedule `{other}`"))),
            };
            return Ok(Some(Box::new(PerturbedDenoiser::uniform(target.clone(), schedule))));
        }
        let Some(source) = mismatched else {
            return Ok(None);
        };
        let prior = match adaptation.and_then(|a| a.alpha) {
            Some(alpha) => {
                let path = AdaptationPath::new(source, target.prior().clone(), vec![alpha])?;
                interpolate_prior(&path, alpha)?
            }
            None => source,
        };
        Ok(Some(Box::new(Denoiser::mismatched(prior))))
    }

    /// Builds measurement, denoisers and solver settings. Synthetic ground
    /// truth and measurement noise are drawn from the config seed.
    pub fn build(&self) -> Result<Problem> {
        let target = Denoiser::target(self.prior.target.build()?);
        let model = MeasurementModel::new(self.kernel()?, self.measurement.scale, self.measurement.noise_sigma)?;
        let mut rng = Rng::new(self.seed);
        let (ground_truth, y) = match &self.problem {
            ProblemSpec::Synthetic {
                height,
                width,
                channels,
            } => {
                let x = target.prior().sample_image(Shape::new(*height, *width, *channels), &mut rng);
                let y = self.measure(&model, &x, &mut rng)?;
                (Some(x), y)
            }
            ProblemSpec::Image {
                ground_truth,
                degraded,
            } => {
                let x = ground_truth.as_ref().map(|p| read_image(self.resolve(p))).transpose()?;
                let y = match (degraded, &x) {
                    (Some(p), _) => read_image(self.resolve(p))?,
                    (None, Some(x)) => self.measure(&model, x, &mut rng)?,
                    (None, None) => {
                        return Err(self.config_error("problem: image needs ground_truth or degraded"))
                    }
                };
                (x, y)
            }
        };
        let fidelity = L2Fidelity::new(model, y, self.prox_config()?);
        Ok(Problem {
            z_step: self.z_step(&target)?,
            fidelity,
            target,
            solver: self.solver_config()?,
            ground_truth,
        })
    }

    fn measure(&self, model: &MeasurementModel, x: &ImageBuffer, rng: &mut Rng) -> Result<ImageBuffer> {
        let clean = model.forward(x)?;
        Ok(clean.add(&gaussian_noise(clean.shape(), model.noise_sigma(), rng)?))
    }
}

/// Parses `gaussian:MEAN,VAR` or `gmm:W,M,V;W,M,V;...`.
pub fn parse_prior(spec: &str) -> Result<AnalyticPrior> {
    let bad = || Error::InvalidArgument(format!("cannot parse prior `{spec}`"));
    let (kind, rest) = spec.split_once(':').ok_or_else(bad)?;
    let nums = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect()
    };
    match kind.trim() {
        "gaussian" => match nums(rest)?.as_slice() {
            [m, v] => AnalyticPrior::gaussian(*m, *v),
            _ => Err(bad()),
        },
        "gmm" => {
            let comps = rest
                .split(';')
                .filter(|c| !c.trim().is_empty())
                .map(|c| match nums(c)?.as_slice() {
                    [w, m, v] => Ok(Component::new(*w, *m, *v)),
                    _ => Err(bad()),
                })
                .collect::<Result<Vec<_>>>()?;
            AnalyticPrior::gmm(comps)
        }
        _ => Err(bad()),
    }
}
