//! Measurement models `A = S H` (circular blur followed by s-fold
//! decimation) and the ℓ₂ data-fidelity term `g(x) = ½‖A x − y‖²`.
//!
//! Convolution is periodic. Decimation keeps the top-left sample of every
//! `s x s` block, so `forward` maps an `H x W` image to `H/s x W/s`.

mod kernel;
mod prox;

pub use kernel::{standard_kernels, Kernel, KernelSpec, STANDARD_KERNELS};
pub use prox::{prox_by_descent, prox_data, DescentConfig, ProxMethod, ProxSolverConfig};

use crate::error::{Error, Result};
use crate::image::{ImageBuffer, Shape};

const KERNEL_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    kernel: Kernel,
    scale: usize,
    noise_sigma: f64,
}

impl MeasurementModel {
    pub fn new(kernel: Kernel, scale: usize, noise_sigma: f64) -> Result<Self> {
        if scale == 0 {
            return Err(Error::InvalidArgument("scale must be >= 1".into()));
        }
        if (kernel.sum() - 1.0).abs() > KERNEL_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "kernel must sum to 1, sums to {}",
                kernel.sum()
            )));
        }
        if !(noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument("noise sigma must be >= 0".into()));
        }
        Ok(Self {
            kernel,
            scale,
            noise_sigma,
        })
    }

    /// Plain denoising: Dirac kernel, no decimation.
    pub fn identity(noise_sigma: f64) -> Self {
        Self::new(Kernel::dirac(), 1, noise_sigma).expect("identity model is valid")
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn is_identity(&self) -> bool {
        self.scale == 1 && self.kernel.is_dirac()
    }

    pub fn measurement_shape(&self, signal: Shape) -> Result<Shape> {
        if !signal.height.is_multiple_of(self.scale) || !signal.width.is_multiple_of(self.scale) {
            return Err(Error::Dimension(format!(
                "image {signal} is not divisible by scale {}",
                self.scale
            )));
        }
        Ok(Shape::new(
            signal.height / self.scale,
            signal.width / self.scale,
            signal.channels,
        ))
    }

    /// `S H x`
    pub fn forward(&self, x: &ImageBuffer) -> Result<ImageBuffer> {
        let out_shape = self.measurement_shape(x.shape())?;
        let blurred = self.blur(x, false);
        if self.scale == 1 {
            return Ok(blurred);
        }
        let s = self.scale;
        Ok(ImageBuffer::from_fn(out_shape, |r, c, ch| blurred.get(r * s, c * s, ch)))
    }

    /// `Hᵀ Sᵀ y`: zero-insertion upsampling, then correlation with the kernel.
    pub fn adjoint(&self, y: &ImageBuffer, signal: Shape) -> Result<ImageBuffer> {
        let expected = self.measurement_shape(signal)?;
        if y.shape() != expected {
            return Err(Error::Dimension(format!(
                "adjoint input {} does not match measurement shape {expected}",
                y.shape()
            )));
        }
        let s = self.scale;
        let up = if s == 1 {
            y.clone()
        } else {
            ImageBuffer::from_fn(signal, |r, c, ch| {
                if r % s == 0 && c % s == 0 {
                    y.get(r / s, c / s, ch)
                } else {
                    0.0
                }
            })
        };
        Ok(self.blur(&up, true))
    }

    /// Periodic convolution (or correlation when `transpose`) with the kernel.
    fn blur(&self, x: &ImageBuffer, transpose: bool) -> ImageBuffer {
        if self.kernel.is_dirac() {
            return x.clone();
        }
        let (h, w, nc) = (x.height() as isize, x.width() as isize, x.channels());
        let (kr, kc) = (self.kernel.rows(), self.kernel.cols());
        let (cr, cc) = ((kr / 2) as isize, (kc / 2) as isize);
        let sign = if transpose { 1 } else { -1 };
        let mut out = ImageBuffer::zeros(x.shape());
        let src = x.as_slice();
        let dst = out.as_mut_slice();
        for i in 0..kr {
            for j in 0..kc {
                let k = self.kernel.get(i, j);
                if k == 0.0 {
                    continue;
                }
                let di = sign * (i as isize - cr);
                let dj = sign * (j as isize - cc);
                for r in 0..h {
                    let sr = (r + di).rem_euclid(h);
                    for c in 0..w {
                        let sc = (c + dj).rem_euclid(w);
                        let o = ((r * w + c) as usize) * nc;
                        let p = ((sr * w + sc) as usize) * nc;
                        for ch in 0..nc {
                            dst[o + ch] += k * src[p + ch];
                        }
                    }
                }
            }
        }
        out
    }

    /// Scaled adjoint `s² Hᵀ Sᵀ y`, which preserves mean intensity; used as
    /// the solver's starting point.
    pub fn back_projection(&self, y: &ImageBuffer, signal: Shape) -> Result<ImageBuffer> {
        let s2 = (self.scale * self.scale) as f64;
        Ok(self.adjoint(y, signal)?.scale(s2))
    }

    /// Signal shape implied by a measurement of this model.
    pub fn signal_shape(&self, measurement: Shape) -> Shape {
        Shape::new(
            measurement.height * self.scale,
            measurement.width * self.scale,
            measurement.channels,
        )
    }
}

/// `g(x) = ½‖S H x − y‖²`
pub fn data_fidelity(model: &MeasurementModel, y: &ImageBuffer, x: &ImageBuffer) -> Result<f64> {
    let r = residual(model, y, x)?;
    Ok(0.5 * r.norm_sq())
}

/// `∇g(x) = Hᵀ Sᵀ (S H x − y)`
pub fn grad_data_fidelity(
    model: &MeasurementModel,
    y: &ImageBuffer,
    x: &ImageBuffer,
) -> Result<ImageBuffer> {
    let r = residual(model, y, x)?;
    model.adjoint(&r, x.shape())
}

fn residual(model: &MeasurementModel, y: &ImageBuffer, x: &ImageBuffer) -> Result<ImageBuffer> {
    let ax = model.forward(x)?;
    ax.ensure_same_shape(y, "measurement vs forward(x)")?;
    Ok(ax.sub(y))
}

/// A differentiable data-fidelity term with a proximal map.
///
/// The default `prox` minimizes `½‖x − v‖² + γ g(x)` by backtracking
/// gradient descent, which also covers nonconvex `g`.
pub trait DataFidelity: Send + Sync {
    fn signal_shape(&self) -> Shape;
    fn value(&self, x: &ImageBuffer) -> Result<f64>;
    fn grad(&self, x: &ImageBuffer) -> Result<ImageBuffer>;

    fn prox(&self, v: &ImageBuffer, gamma: f64) -> Result<ImageBuffer> {
        prox_by_descent(self, v, gamma, &DescentConfig::default())
    }

    /// Deterministic starting point for the splitting variables.
    fn initial_estimate(&self) -> Result<ImageBuffer> {
        Ok(ImageBuffer::zeros(self.signal_shape()))
    }
}

/// `g(x) = ½‖S H x − y‖²` bound to a measurement.
#[derive(Debug, Clone)]
pub struct L2Fidelity {
    pub model: MeasurementModel,
    pub y: ImageBuffer,
    pub prox_config: ProxSolverConfig,
    signal: Shape,
}

impl L2Fidelity {
    pub fn new(model: MeasurementModel, y: ImageBuffer, prox_config: ProxSolverConfig) -> Self {
        let signal = model.signal_shape(y.shape());
        Self {
            model,
            y,
            prox_config,
            signal,
        }
    }
}

impl DataFidelity for L2Fidelity {
    fn signal_shape(&self) -> Shape {
        self.signal
    }

    fn value(&self, x: &ImageBuffer) -> Result<f64> {
        data_fidelity(&self.model, &self.y, x)
    }

    fn grad(&self, x: &ImageBuffer) -> Result<ImageBuffer> {
        grad_data_fidelity(&self.model, &self.y, x)
    }

    fn prox(&self, v: &ImageBuffer, gamma: f64) -> Result<ImageBuffer> {
        prox_data(&self.model, &self.y, v, gamma, &self.prox_config)
    }

    fn initial_estimate(&self) -> Result<ImageBuffer> {
        self.model.back_projection(&self.y, self.signal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{gaussian_noise, Rng};

    fn ones(h: usize, w: usize) -> ImageBuffer {
        ImageBuffer::filled(Shape::gray(h, w), 1.0)
    }

    #[test]
    fn dirac_decimation_of_constant() {
        let m = MeasurementModel::new(Kernel::dirac(), 2, 0.0).unwrap();
        let y = m.forward(&ones(4, 4)).unwrap();
        assert_eq!(y.shape(), Shape::gray(2, 2));
        assert!(y.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn identity_forward_and_adjoint_are_exact() {
        let m = MeasurementModel::identity(0.0);
        let x = gaussian_noise(Shape::new(5, 7, 3), 1.0, &mut Rng::new(1)).unwrap();
        assert_eq!(m.forward(&x).unwrap(), x);
        assert_eq!(m.adjoint(&x, x.shape()).unwrap(), x);
    }

    #[test]
    fn box_blur_preserves_constants() {
        let m = MeasurementModel::new(Kernel::uniform(3).unwrap(), 1, 0.0).unwrap();
        let x = ImageBuffer::filled(Shape::gray(6, 6), 0.37);
        let y = m.forward(&x).unwrap();
        assert!(y.as_slice().iter().all(|&v| (v - 0.37).abs() < 1e-15));
    }

    #[test]
    fn zero_insertion_adjoint() {
        let m = MeasurementModel::new(Kernel::dirac(), 2, 0.0).unwrap();
        let up = m.adjoint(&ones(2, 2), Shape::gray(4, 4)).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let expect = if r % 2 == 0 && c % 2 == 0 { 1.0 } else { 0.0 };
                assert_eq!(up.get(r, c, 0), expect);
            }
        }
    }

    #[test]
    fn shifted_kernel_moves_image() {
        // kernel with mass one pixel right of centre shifts content right
        let mut data = vec![0.0; 9];
        data[5] = 1.0;
        let m = MeasurementModel::new(Kernel::new(3, 3, data).unwrap(), 1, 0.0).unwrap();
        let mut x = ImageBuffer::zeros(Shape::gray(3, 4));
        x.set(1, 1, 0, 1.0);
        let y = m.forward(&x).unwrap();
        assert_eq!(y.get(1, 2, 0), 1.0);
        assert_eq!(y.norm_sq(), 1.0);
    }

    #[test]
    fn divisibility_is_checked() {
        let m = MeasurementModel::new(Kernel::dirac(), 2, 0.0).unwrap();
        assert!(m.forward(&ones(3, 4)).is_err());
        assert!(m.adjoint(&ones(3, 3), Shape::gray(4, 4)).is_err());
    }

    #[test]
    fn unnormalized_kernel_rejected() {
        let k = Kernel::new(1, 3, vec![1.0, 1.0, 1.0]).unwrap();
        assert!(MeasurementModel::new(k, 1, 0.0).is_err());
    }

    #[test]
    fn fidelity_value_and_zero_residual() {
        let m = MeasurementModel::identity(0.0);
        let y = ImageBuffer::zeros(Shape::gray(1, 10));
        let x = ImageBuffer::filled(Shape::gray(1, 10), 0.1);
        assert!((data_fidelity(&m, &y, &x).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(data_fidelity(&m, &x, &x).unwrap(), 0.0);
        assert_eq!(grad_data_fidelity(&m, &x, &x).unwrap().max_abs(), 0.0);
    }
}
