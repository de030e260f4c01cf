//! PSNR (peak 1) and SSIM (11x11 Gaussian window, σ = 1.5, K₁ = 0.01,
//! K₂ = 0.03, dynamic range 1, valid region only, channels averaged).

use crate::error::Result;
use crate::image::ImageBuffer;

/// Value written in place of an infinite PSNR.
pub const PSNR_CAP: f64 = 99.0;

const WINDOW: usize = 11;
const WINDOW_STD: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

/// `20 log₁₀(1/rmse)`; `+∞` for identical images.
pub fn psnr(x_hat: &ImageBuffer, x_ref: &ImageBuffer) -> Result<f64> {
    x_hat.ensure_same_shape(x_ref, "psnr")?;
    let mse = x_hat.distance(x_ref).powi(2) / x_hat.len() as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}

/// `20 log₁₀(1/‖x̂ − x‖₂)`, without the per-pixel normalization.
pub fn psnr_paper_formula(x_hat: &ImageBuffer, x_ref: &ImageBuffer) -> Result<f64> {
    x_hat.ensure_same_shape(x_ref, "psnr")?;
    let d = x_hat.distance(x_ref);
    Ok(if d == 0.0 { f64::INFINITY } else { -20.0 * d.log10() })
}

pub fn capped(db: f64) -> f64 {
    db.min(PSNR_CAP)
}

fn gaussian_window(size: usize) -> Vec<f64> {
    let c = (size / 2) as f64;
    let w: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * WINDOW_STD * WINDOW_STD)).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    w.into_iter().map(|v| v / sum).collect()
}

/// Separable "valid" filtering of an `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, win: &[f64]) -> Vec<f64> {
    let m = win.len();
    let (oh, ow) = (h - m + 1, w - m + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..m).map(|j| win[j] * plane[r * w + c + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..m).map(|i| win[i] * rows[(r + i) * ow + c]).sum();
        }
    }
    out
}

/// Mean structural similarity. Images smaller than 11 pixels on a side use
/// the largest odd window that fits.
pub fn ssim(x_hat: &ImageBuffer, x_ref: &ImageBuffer) -> Result<f64> {
    x_hat.ensure_same_shape(x_ref, "ssim")?;
    let (h, w) = (x_hat.height(), x_hat.width());
    let mut size = WINDOW.min(h).min(w);
    if size % 2 == 0 {
        size -= 1;
    }
    let win = gaussian_window(size);
    let mut total = 0.0;
    for ch in 0..x_hat.channels() {
        let a = x_hat.channel(ch);
        let b = x_ref.channel(ch);
        let (a, b) = (a.as_slice(), b.as_slice());
        let prod = |f: &dyn Fn(usize) -> f64| (0..a.len()).map(f).collect::<Vec<f64>>();
        let mu_a = filter_valid(a, h, w, &win);
        let mu_b = filter_valid(b, h, w, &win);
        let aa = filter_valid(&prod(&|i| a[i] * a[i]), h, w, &win);
        let bb = filter_valid(&prod(&|i| b[i] * b[i]), h, w, &win);
        let ab = filter_valid(&prod(&|i| a[i] * b[i]), h, w, &win);
        let mut acc = 0.0;
        for i in 0..mu_a.len() {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + C1) * (2.0 * cov + C2))
                / ((ma * ma + mb * mb + C1) * (va + vb + C2));
        }
        total += acc / mu_a.len() as f64;
    }
    Ok(total / x_hat.channels() as f64)
}
