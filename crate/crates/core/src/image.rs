//! Dense image container and seeded noise generation.
//!
//! Layout is row-major with interleaved channels: sample `(row, col, ch)`
//! lives at `data[(row * width + col) * channels + ch]`. Values are `f64`
//! and are never clamped here; clamping happens only when writing files.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub const fn gray(height: usize, width: usize) -> Self {
        Self::new(height, width, 1)
    }

    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    shape: Shape,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "buffer of {} samples cannot hold a {shape} image",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for r in 0..shape.height {
            for c in 0..shape.width {
                for ch in 0..shape.channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self { shape, data }
    }

    #[inline]
    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.shape.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.shape.width
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    fn offset(&self, row: usize, col: usize, ch: usize) -> usize {
        (row * self.shape.width + col) * self.shape.channels + ch
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[self.offset(row, col, ch)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f64) {
        let i = self.offset(row, col, ch);
        self.data[i] = value;
    }

    pub fn ensure_same_shape(&self, other: &ImageBuffer, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::Dimension(format!(
                "{what}: {} vs {}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageBuffer {
        ImageBuffer {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination; panics on shape mismatch (internal use).
    pub fn zip_map(&self, other: &ImageBuffer, f: impl Fn(f64, f64) -> f64) -> ImageBuffer {
        assert_eq!(self.shape, other.shape, "zip_map shape mismatch");
        ImageBuffer {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &ImageBuffer) -> ImageBuffer {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ImageBuffer) -> ImageBuffer {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> ImageBuffer {
        self.map(|v| k * v)
    }

    /// `self += k * other`
    pub fn axpy(&mut self, k: f64, other: &ImageBuffer) {
        assert_eq!(self.shape, other.shape, "axpy shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
    }

    pub fn dot(&self, other: &ImageBuffer) -> f64 {
        assert_eq!(self.shape, other.shape, "dot shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn distance(&self, other: &ImageBuffer) -> f64 {
        assert_eq!(self.shape, other.shape, "distance shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn clamped(&self) -> ImageBuffer {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Copy of one channel as a single-channel image.
    pub fn channel(&self, ch: usize) -> ImageBuffer {
        let s = Shape::gray(self.height(), self.width());
        ImageBuffer::from_fn(s, |r, c, _| self.get(r, c, ch))
    }

    pub fn set_channel(&mut self, ch: usize, plane: &ImageBuffer) {
        for r in 0..self.height() {
            for c in 0..self.width() {
                self.set(r, c, ch, plane.get(r, c, 0));
            }
        }
    }
}

/// Seeded generator. ChaCha20 is a fixed, portable algorithm, so a seed
/// reproduces the same stream on every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform sample in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

/// I.i.d. `N(0, sigma^2)` samples with the given shape.
pub fn gaussian_noise(shape: Shape, sigma: f64, rng: &mut Rng) -> Result<ImageBuffer> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be finite and >= 0, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(ImageBuffer::zeros(shape));
    }
    let data = (0..shape.len())
        .map(|_| sigma * rng.standard_normal())
        .collect();
    ImageBuffer::from_vec(shape, data)
}
