//! Test-side oracles, written without calling into the library's
//! implementations of the quantities they check.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pnp_admm::priors::AnalyticPrior;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[allow(clippy::too_many_arguments)]
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fb, fm) = (f(a), f(b), f(m));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, fa, b, fb, m, fm, whole, tol, 50)
}

/// Integrates over consecutive pieces so that narrow peaks at the
/// breakpoints are never stepped over.
pub fn integrate_pieces(f: &dyn Fn(f64) -> f64, mut points: Vec<f64>, tol: f64) -> f64 {
    points.sort_by(f64::total_cmp);
    points.dedup();
    points.windows(2).map(|w| integrate(f, w[0], w[1], tol)).sum()
}

fn log_gauss(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

/// `E[x | v]` by quadrature of `∫ x p(x) N(v; x, σ²) dx / ∫ p(x) N(v; x, σ²) dx`.
pub fn posterior_mean_quadrature(prior: &AnalyticPrior, v: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let log_joint = |x: f64| {
        let lp = prior
            .components()
            .iter()
            .map(|c| c.weight.ln() + log_gauss(x, c.mean, c.variance))
            .fold(f64::NEG_INFINITY, |a, b| if a > b { a + (b - a).exp().ln_1p() } else { b + (a - b).exp().ln_1p() });
        lp + log_gauss(v, x, s2)
    };
    // Peaks sit at the per-component posterior means; widths are at most σ.
    let mut points = vec![v];
    let mut peak = f64::NEG_INFINITY;
    for c in prior.components() {
        let m = (c.variance * v + s2 * c.mean) / (c.variance + s2);
        let sd = (c.variance * s2 / (c.variance + s2)).sqrt();
        peak = peak.max(log_joint(m));
        for k in [-14.0, -6.0, -2.0, -0.5, 0.0, 0.5, 2.0, 6.0, 14.0] {
            points.push(m + k * sd);
        }
        points.push(c.mean);
    }
    let weight = |x: f64| (log_joint(x) - peak).exp();
    let num = integrate_pieces(&|x| x * weight(x), points.clone(), 1e-15);
    let den = integrate_pieces(&weight, points, 1e-15);
    num / den
}

/// Minimal binary PGM reader (8-bit, comments allowed), independent of the
/// crate's codec. Returns `(height, width, pixels in [0, 1])`.
pub fn read_pgm8(path: &Path) -> (usize, usize, Vec<f64>) {
    let bytes = std::fs::read(path).unwrap();
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        if bytes[i] == b'#' {
            while bytes[i] != b'\n' {
                i += 1;
            }
        } else if bytes[i].is_ascii_whitespace() {
            i += 1;
        } else {
            let start = i;
            while !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            fields.push(String::from_utf8(bytes[start..i].to_vec()).unwrap());
        }
    }
    assert_eq!(fields[0], "P5");
    let (w, h, max): (usize, usize, f64) = (fields[1].parse().unwrap(), fields[2].parse().unwrap(), fields[3].parse().unwrap());
    assert_eq!(max, 255.0);
    let data = bytes[i + 1..i + 1 + w * h].iter().map(|&b| b as f64 / max).collect();
    (h, w, data)
}

/// `20 log10(1 / rmse)` with a plain loop.
pub fn psnr_oracle(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut sum = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        sum += d * d;
    }
    let rmse = (sum / a.len() as f64).sqrt();
    20.0 * (1.0 / rmse).log10()
}

/// Central difference of a scalar function.
pub fn central_difference(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
