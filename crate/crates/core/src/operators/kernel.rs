//! Blur kernels: Gaussian constructors, the standard eight-kernel bank, and
//! the plain-text matrix format (rows of whitespace-separated reals).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Point-spread function with odd side lengths, centred at `(rows/2, cols/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows.is_multiple_of(2) || cols.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "kernel sides must be odd, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "kernel {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("kernel has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn dirac() -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![1.0],
        }
    }

    /// `size x size` box filter.
    pub fn uniform(size: usize) -> Result<Self> {
        let n = (size * size) as f64;
        Self::new(size, size, vec![1.0 / n; size * size])
    }

    /// Isotropic Gaussian with the given standard deviation (pixels),
    /// truncated at `ceil(3 std)` and normalized.
    pub fn gaussian(std: f64) -> Result<Self> {
        Self::anisotropic_gaussian(std, std, 0.0)
    }

    /// Rotated anisotropic Gaussian: standard deviations `std_major` along
    /// the direction at `angle` radians from the column axis, `std_minor`
    /// across it.
    pub fn anisotropic_gaussian(std_major: f64, std_minor: f64, angle: f64) -> Result<Self> {
        if !(std_major > 0.0 && std_minor > 0.0) {
            return Err(Error::InvalidArgument("Gaussian kernel std must be > 0".into()));
        }
        let radius = (3.0 * std_major.max(std_minor)).ceil() as isize;
        let side = (2 * radius + 1) as usize;
        let (s, c) = angle.sin_cos();
        let mut data = Vec::with_capacity(side * side);
        for i in -radius..=radius {
            for j in -radius..=radius {
                let (y, x) = (i as f64, j as f64);
                let u = c * x + s * y;
                let v = -s * x + c * y;
                data.push((-0.5 * (u * u / (std_major * std_major) + v * v / (std_minor * std_minor))).exp());
            }
        }
        Self::new(side, side, data)?.normalized()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let sum: f64 = self.data.iter().sum();
        if sum.abs() < 1e-300 {
            return Err(Error::InvalidArgument("kernel sums to zero".into()));
        }
        self.data.iter_mut().for_each(|v| *v /= sum);
        Ok(self)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn is_dirac(&self) -> bool {
        let center = (self.rows / 2) * self.cols + self.cols / 2;
        self.data
            .iter()
            .enumerate()
            .all(|(i, &v)| if i == center { v == 1.0 } else { v == 0.0 })
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| {
                        Error::InvalidArgument(format!("kernel line {}: bad number {t:?}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::InvalidArgument("kernel rows are empty or ragged".into()));
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| format!("{:.17e}", self.get(i, j))).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_text(&text)
    }
}

/// Descriptor of one entry of the standard kernel bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub name: &'static str,
    pub std_major: f64,
    pub std_minor: f64,
    pub angle_deg: f64,
}

/// Four isotropic Gaussians (std 0.7, 1.2, 1.6, 2.0) followed by four
/// anisotropic Gaussians. The anisotropic parameters are our own choice.
pub const STANDARD_KERNELS: [KernelSpec; 8] = [
    KernelSpec { name: "iso_0.7", std_major: 0.7, std_minor: 0.7, angle_deg: 0.0 },
    KernelSpec { name: "iso_1.2", std_major: 1.2, std_minor: 1.2, angle_deg: 0.0 },
    KernelSpec { name: "iso_1.6", std_major: 1.6, std_minor: 1.6, angle_deg: 0.0 },
    KernelSpec { name: "iso_2.0", std_major: 2.0, std_minor: 2.0, angle_deg: 0.0 },
    KernelSpec { name: "aniso_2.0x0.8_0", std_major: 2.0, std_minor: 0.8, angle_deg: 0.0 },
    KernelSpec { name: "aniso_2.0x0.8_45", std_major: 2.0, std_minor: 0.8, angle_deg: 45.0 },
    KernelSpec { name: "aniso_2.5x1.0_90", std_major: 2.5, std_minor: 1.0, angle_deg: 90.0 },
    KernelSpec { name: "aniso_2.5x1.0_135", std_major: 2.5, std_minor: 1.0, angle_deg: 135.0 },
];

impl KernelSpec {
    pub fn build(&self) -> Kernel {
        Kernel::anisotropic_gaussian(self.std_major, self.std_minor, self.angle_deg.to_radians())
            .expect("standard kernel parameters are valid")
    }
}

pub fn standard_kernels() -> Vec<(&'static str, Kernel)> {
    STANDARD_KERNELS.iter().map(|s| (s.name, s.build())).collect()
}
