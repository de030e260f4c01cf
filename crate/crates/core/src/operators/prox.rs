//! Proximal map of the ℓ₂ data term:
//! `argmin_x ½‖x − v‖² + γ·½‖S H x − y‖²`, i.e. the solution of
//! `(I + γ Hᵀ Sᵀ S H) x = v + γ Hᵀ Sᵀ y`.
//!
//! The closed form uses the Woodbury identity
//! `(I + γAᵀA)⁻¹ = I − γAᵀ(I + γAAᵀ)⁻¹A`. Under periodic boundaries
//! `A Aᵀ` is circulant on the low-resolution grid, with eigenvalue at
//! frequency `(p, q)` equal to the mean of `|K|²` over the `s²` aliased
//! high-resolution frequencies `(p + aM, q + bN)`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{DataFidelity, MeasurementModel};
use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProxMethod {
    #[default]
    ClosedFormFft,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxSolverConfig {
    pub method: ProxMethod,
    /// Relative residual `‖b − Mx‖ / ‖b‖` at which CG stops.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for ProxSolverConfig {
    fn default() -> Self {
        Self {
            method: ProxMethod::ClosedFormFft,
            cg_tol: 1e-12,
            cg_max_iter: 1000,
        }
    }
}

impl ProxSolverConfig {
    pub fn conjugate_gradient(cg_tol: f64, cg_max_iter: usize) -> Self {
        Self {
            method: ProxMethod::ConjugateGradient,
            cg_tol,
            cg_max_iter,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return Err(Error::InvalidArgument(
                "cg_tol must be > 0 and cg_max_iter >= 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn prox_data(
    model: &MeasurementModel,
    y: &ImageBuffer,
    v: &ImageBuffer,
    gamma: f64,
    cfg: &ProxSolverConfig,
) -> Result<ImageBuffer> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be > 0, got {gamma}")));
    }
    cfg.validate()?;
    let expected = model.measurement_shape(v.shape())?;
    if y.shape() != expected {
        return Err(Error::Dimension(format!(
            "measurement {} does not match {expected}",
            y.shape()
        )));
    }
    let mut rhs = model.adjoint(y, v.shape())?;
    rhs = rhs.scale(gamma);
    rhs.axpy(1.0, v);
    match cfg.method {
        ProxMethod::ClosedFormFft => Ok(closed_form(model, &rhs, gamma)),
        ProxMethod::ConjugateGradient => conjugate_gradient(model, &rhs, gamma, cfg),
    }
}

struct Fft2 {
    h: usize,
    w: usize,
    row_fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    row_inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
    col_fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    col_inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Fft2 {
    fn new(h: usize, w: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            h,
            w,
            row_fwd: planner.plan_fft_forward(w),
            row_inv: planner.plan_fft_inverse(w),
            col_fwd: planner.plan_fft_forward(h),
            col_inv: planner.plan_fft_inverse(h),
        }
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        for r in buf.chunks_exact_mut(self.w) {
            row.process(r);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); self.h];
        for c in 0..self.w {
            for r in 0..self.h {
                column[r] = buf[r * self.w + c];
            }
            col.process(&mut column);
            for r in 0..self.h {
                buf[r * self.w + c] = column[r];
            }
        }
        if inverse {
            let n = (self.h * self.w) as f64;
            buf.iter_mut().for_each(|v| *v /= n);
        }
    }

    /// Spectrum of the kernel placed with its centre at the origin.
    fn kernel_spectrum(&self, model: &MeasurementModel) -> Vec<Complex64> {
        let k = model.kernel();
        let (cr, cc) = ((k.rows() / 2) as isize, (k.cols() / 2) as isize);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.h * self.w];
        for i in 0..k.rows() {
            for j in 0..k.cols() {
                let r = (i as isize - cr).rem_euclid(self.h as isize) as usize;
                let c = (j as isize - cc).rem_euclid(self.w as isize) as usize;
                buf[r * self.w + c] += k.get(i, j);
            }
        }
        self.transform(&mut buf, false);
        buf
    }
}

fn closed_form(model: &MeasurementModel, rhs: &ImageBuffer, gamma: f64) -> ImageBuffer {
    let shape = rhs.shape();
    let (h, w) = (shape.height, shape.width);
    let s = model.scale();
    let (m, n) = (h / s, w / s);
    let fft = Fft2::new(h, w);
    let kspec = fft.kernel_spectrum(model);
    let inv_s2 = 1.0 / (s * s) as f64;

    // eigenvalues of S H Hᵀ Sᵀ on the low-res grid
    let mut lambda = vec![0.0; m * n];
    for p in 0..m {
        for q in 0..n {
            let mut acc = 0.0;
            for a in 0..s {
                for b in 0..s {
                    acc += kspec[(p + a * m) * w + q + b * n].norm_sqr();
                }
            }
            lambda[p * n + q] = acc * inv_s2;
        }
    }

    let mut out = ImageBuffer::zeros(shape);
    for ch in 0..shape.channels {
        let mut spec: Vec<Complex64> = rhs
            .channel(ch)
            .as_slice()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft.transform(&mut spec, false);

        // low-res spectrum of S H r, divided by (1 + γλ)
        let mut low = vec![Complex64::new(0.0, 0.0); m * n];
        for p in 0..m {
            for q in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..s {
                    for b in 0..s {
                        let i = (p + a * m) * w + q + b * n;
                        acc += kspec[i] * spec[i];
                    }
                }
                low[p * n + q] = acc * inv_s2 / (1.0 + gamma * lambda[p * n + q]);
            }
        }
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                spec[i] -= gamma * kspec[i].conj() * low[(r % m) * n + c % n];
            }
        }
        fft.transform(&mut spec, true);
        let plane = ImageBuffer::from_vec(
            Shape::gray(h, w),
            spec.iter().map(|z| z.re).collect(),
        )
        .expect("plane shape");
        out.set_channel(ch, &plane);
    }
    out
}

fn conjugate_gradient(
    model: &MeasurementModel,
    rhs: &ImageBuffer,
    gamma: f64,
    cfg: &ProxSolverConfig,
) -> Result<ImageBuffer> {
    let shape = rhs.shape();
    let apply = |x: &ImageBuffer| -> Result<ImageBuffer> {
        let ata = model.adjoint(&model.forward(x)?, shape)?;
        let mut out = x.clone();
        out.axpy(gamma, &ata);
        Ok(out)
    };
    let b_norm = rhs.norm();
    let mut x = ImageBuffer::zeros(shape);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut rr = r.norm_sq();
    for _ in 0..cfg.cg_max_iter {
        if rr.sqrt() <= cfg.cg_tol * b_norm {
            return Ok(x);
        }
        let ap = apply(&p)?;
        let alpha = rr / p.dot(&ap);
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = r.norm_sq();
        let beta = rr_new / rr;
        rr = rr_new;
        p = p.scale(beta);
        p.axpy(1.0, &r);
    }
    let residual = rr.sqrt() / b_norm;
    if residual <= cfg.cg_tol {
        Ok(x)
    } else {
        Err(Error::CgNotConverged {
            iterations: cfg.cg_max_iter,
            residual,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentConfig {
    /// Stop when `‖(x − v) + γ∇g(x)‖ ≤ tol · (1 + ‖v‖)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

/// Prox of a generic (possibly nonconvex) `g` by gradient descent with
/// Armijo backtracking on `½‖x − v‖² + γ g(x)`, started at `v`.
pub fn prox_by_descent<F: DataFidelity + ?Sized>(
    g: &F,
    v: &ImageBuffer,
    gamma: f64,
    cfg: &DescentConfig,
) -> Result<ImageBuffer> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be > 0, got {gamma}")));
    }
    let objective = |x: &ImageBuffer| -> Result<f64> { Ok(0.5 * x.distance(v).powi(2) + gamma * g.value(x)?) };
    let gradient = |x: &ImageBuffer| -> Result<ImageBuffer> {
        let mut d = x.sub(v);
        d.axpy(gamma, &g.grad(x)?);
        Ok(d)
    };
    let threshold = cfg.tol * (1.0 + v.norm());
    let mut x = v.clone();
    let mut fx = objective(&x)?;
    let mut step = 1.0;
    let mut gnorm = f64::INFINITY;
    for it in 0..cfg.max_iter {
        let grad = gradient(&x)?;
        gnorm = grad.norm();
        if gnorm <= threshold {
            return Ok(x);
        }
        let gsq = gnorm * gnorm;
        step *= 2.0;
        loop {
            let mut trial = x.clone();
            trial.axpy(-step, &grad);
            let ft = objective(&trial)?;
            // near the optimum the decrease drops below rounding in f, so
            // fall back to requiring a smaller gradient
            let flat = (ft - fx).abs() <= 1e-13 * (1.0 + fx.abs());
            if ft <= fx - 0.5 * step * gsq || (flat && gradient(&trial)?.norm() < gnorm) {
                x = trial;
                fx = ft;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return Err(Error::ProxNotConverged {
                    iterations: it + 1,
                    residual: gnorm,
                });
            }
        }
    }
    Err(Error::ProxNotConverged {
        iterations: cfg.max_iter,
        residual: gnorm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{gaussian_noise, Rng};
    use crate::operators::{grad_data_fidelity, Kernel, L2Fidelity};

    #[test]
    fn identity_prox_closed_form_value() {
        let m = MeasurementModel::identity(0.0);
        let shape = Shape::gray(4, 4);
        let v = ImageBuffer::zeros(shape);
        let y = ImageBuffer::filled(shape, 1.0);
        for cfg in [ProxSolverConfig::default(), ProxSolverConfig::conjugate_gradient(1e-14, 50)] {
            let x = prox_data(&m, &y, &v, 1.0, &cfg).unwrap();
            assert!(x.as_slice().iter().all(|&t| (t - 0.5).abs() < 1e-14));
        }
    }

    #[test]
    fn tiny_gamma_returns_input() {
        let m = MeasurementModel::new(Kernel::gaussian(1.2).unwrap(), 2, 0.0).unwrap();
        let mut rng = Rng::new(5);
        let v = gaussian_noise(Shape::gray(16, 16), 1.0, &mut rng).unwrap();
        let y = gaussian_noise(Shape::gray(8, 8), 1.0, &mut rng).unwrap();
        let x = prox_data(&m, &y, &v, 1e-14, &ProxSolverConfig::default()).unwrap();
        assert!(x.sub(&v).max_abs() <= 1e-12);
    }

    #[test]
    fn optimality_residual_small() {
        let mut rng = Rng::new(11);
        for s in [1, 2, 4] {
            let m = MeasurementModel::new(Kernel::anisotropic_gaussian(2.0, 0.8, 0.6).unwrap(), s, 0.0).unwrap();
            let v = gaussian_noise(Shape::new(16, 16, 3), 1.0, &mut rng).unwrap();
            let y = gaussian_noise(Shape::new(16 / s, 16 / s, 3), 1.0, &mut rng).unwrap();
            let gamma = 0.7;
            let z = prox_data(&m, &y, &v, gamma, &ProxSolverConfig::default()).unwrap();
            let mut res = z.sub(&v);
            res.axpy(gamma, &grad_data_fidelity(&m, &y, &z).unwrap());
            assert!(res.norm() <= 1e-8 * (1.0 + v.norm()), "s={s}: {}", res.norm());
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let m = MeasurementModel::new(Kernel::gaussian(2.0).unwrap(), 2, 0.0).unwrap();
        let mut rng = Rng::new(1);
        let v = gaussian_noise(Shape::gray(16, 16), 1.0, &mut rng).unwrap();
        let y = gaussian_noise(Shape::gray(8, 8), 1.0, &mut rng).unwrap();
        let err = prox_data(&m, &y, &v, 100.0, &ProxSolverConfig::conjugate_gradient(1e-15, 1)).unwrap_err();
        assert!(matches!(err, Error::CgNotConverged { iterations: 1, .. }));
    }

    #[test]
    fn bad_gamma_rejected() {
        let m = MeasurementModel::identity(0.0);
        let v = ImageBuffer::zeros(Shape::gray(2, 2));
        assert!(prox_data(&m, &v, &v, 0.0, &ProxSolverConfig::default()).is_err());
    }

    #[test]
    fn descent_prox_matches_closed_form_for_l2() {
        // a wrapper that hides the closed-form prox so the default is used
        struct Plain(L2Fidelity);
        impl DataFidelity for Plain {
            fn signal_shape(&self) -> Shape {
                self.0.signal_shape()
            }
            fn value(&self, x: &ImageBuffer) -> Result<f64> {
                self.0.value(x)
            }
            fn grad(&self, x: &ImageBuffer) -> Result<ImageBuffer> {
                self.0.grad(x)
            }
        }
        let mut rng = Rng::new(21);
        let m = MeasurementModel::new(Kernel::gaussian(0.7).unwrap(), 2, 0.0).unwrap();
        let y = gaussian_noise(Shape::gray(4, 4), 1.0, &mut rng).unwrap();
        let v = gaussian_noise(Shape::gray(8, 8), 1.0, &mut rng).unwrap();
        let fid = L2Fidelity::new(m, y, ProxSolverConfig::default());
        let exact = fid.prox(&v, 0.8).unwrap();
        let approx = Plain(fid).prox(&v, 0.8).unwrap();
        assert!(exact.distance(&approx) <= 1e-8);
    }

    #[test]
    fn descent_prox_nonconvex_fidelity() {
        // Cauchy-type g(x) = Σ log(1 + (x − y)²), nonconvex for |x − y| > 1
        struct Cauchy(ImageBuffer);
        impl DataFidelity for Cauchy {
            fn signal_shape(&self) -> Shape {
                self.0.shape()
            }
            fn value(&self, x: &ImageBuffer) -> Result<f64> {
                Ok(x.sub(&self.0).as_slice().iter().map(|d| (1.0 + d * d).ln()).sum())
            }
            fn grad(&self, x: &ImageBuffer) -> Result<ImageBuffer> {
                Ok(x.sub(&self.0).map(|d| 2.0 * d / (1.0 + d * d)))
            }
        }
        let mut rng = Rng::new(8);
        let y = gaussian_noise(Shape::gray(5, 5), 2.0, &mut rng).unwrap();
        let g = Cauchy(y);
        let v = gaussian_noise(Shape::gray(5, 5), 2.0, &mut rng).unwrap();
        let gamma = 0.3;
        let x = g.prox(&v, gamma).unwrap();
        let mut res = x.sub(&v);
        res.axpy(gamma, &g.grad(&x).unwrap());
        assert!(res.norm() <= 1e-10 * (1.0 + v.norm()));
    }
}
