//! Augmented Lagrangian, `∇f`, the bound constants, and per-iteration checks
//! of the descent and stationarity inequalities against solver traces.

pub mod metrics;

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::operators::DataFidelity;
use crate::priors::RegularizerContext;
use crate::solver::SolverTrace;

/// Relative slack for inequality checks, scaled by `1 + |φ|` or `1 + |rhs|`.
pub const INEQUALITY_RTOL: f64 = 1e-9;

/// Applied to the largest observed `‖z^k − z*‖`.
pub const R_SAFETY: f64 = 1.1;

/// `φ = g(x) + h(z) + (1/γ)sᵀ(x−z) + (1/2γ)‖x−z‖²`, with `γ` taken from
/// the regularizer. Returns `+∞` when `z` is outside the denoiser range.
pub fn augmented_lagrangian(
    g: &dyn DataFidelity,
    h: &RegularizerContext,
    x: &ImageBuffer,
    z: &ImageBuffer,
    s: &ImageBuffer,
) -> Result<f64> {
    let h_z = match h.value(z) {
        Ok(v) => v,
        Err(Error::OutsideRange { .. }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let gamma = h.gamma();
    let d = x.sub(z);
    Ok(g.value(x)? + h_z + s.dot(&d) / gamma + d.norm_sq() / (2.0 * gamma))
}

/// `∇f(x) = ∇g(x) + ∇h(x)`
pub fn grad_f(g: &dyn DataFidelity, h: &RegularizerContext, x: &ImageBuffer) -> Result<ImageBuffer> {
    Ok(g.grad(x)?.add(&h.grad(x)?))
}

/// `f(x) = g(x) + h(x)`
pub fn objective(g: &dyn DataFidelity, h: &RegularizerContext, x: &ImageBuffer) -> Result<f64> {
    Ok(g.value(x)? + h.value(x)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConstants {
    pub lipschitz: f64,
    pub gamma: f64,
    pub r: f64,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub c: f64,
}

impl TheoremConstants {
    /// `(1 − γL − 2γ²L²)/(2γ)`, the exact-denoiser descent coefficient.
    pub fn exact_descent_coefficient(&self) -> f64 {
        let gl = self.gamma * self.lipschitz;
        (1.0 - gl - 2.0 * gl * gl) / (2.0 * self.gamma)
    }

    /// `(1 − 2γL − 2γ²L²)/(2γ)`, the mismatched-denoiser descent coefficient.
    pub fn mismatched_descent_coefficient(&self) -> f64 {
        let gl = self.gamma * self.lipschitz;
        (1.0 - 2.0 * gl - 2.0 * gl * gl) / (2.0 * self.gamma)
    }
}

/// `A₁ = 4(1+γ²L²)² / (γ(1−2γL−2γ²L²))`
/// `A₂ = (3+16R)(1+γ²L²) / (2γ²(1−2γL−2γ²L²)) + 2(1/γ+L)²`
/// `B  = 2γ / (1−γL−2γ²L²)`
/// `C  = B(1+γ²L²)/γ²`
pub fn theorem_constants(lipschitz: f64, gamma: f64, r: f64) -> Result<TheoremConstants> {
    if !(lipschitz >= 0.0 && gamma > 0.0 && r >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need L >= 0, gamma > 0, R >= 0 (got L = {lipschitz}, gamma = {gamma}, R = {r})"
        )));
    }
    let gl = gamma * lipschitz;
    if gl > 0.25 * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge {
            gamma,
            lipschitz,
            bound: 1.0 / (4.0 * lipschitz),
        });
    }
    let q = 1.0 + gl * gl;
    let d1 = 1.0 - 2.0 * gl - 2.0 * gl * gl;
    let d2 = 1.0 - gl - 2.0 * gl * gl;
    let a1 = 4.0 * q * q / (gamma * d1);
    let a2 = (3.0 + 16.0 * r) * q / (2.0 * gamma * gamma * d1) + 2.0 * (1.0 / gamma + lipschitz).powi(2);
    let b = 2.0 * gamma / d2;
    let c = b * q / (gamma * gamma);
    Ok(TheoremConstants {
        lipschitz,
        gamma,
        r,
        a1,
        a2,
        b,
        c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentRow {
    pub k: usize,
    pub phi: f64,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    pub mismatched: bool,
    pub rows: Vec<DescentRow>,
}

impl DescentReport {
    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }

    pub fn violations(&self) -> Vec<DescentRow> {
        self.rows.iter().filter(|r| !r.satisfied).copied().collect()
    }
}

/// Checks, at every iteration,
///
/// `φ^k ≤ φ^{k−1} − c‖z^k − z^{k−1}‖² [+ (3/8γ)δ_k² + (2R/γ)δ_k]`
///
/// with `c` the exact-denoiser coefficient, or the mismatched coefficient
/// plus the bracketed slack when `mismatched` is set.
pub fn check_lemma_descent(
    trace: &SolverTrace,
    lipschitz: f64,
    gamma: f64,
    r: f64,
    mismatched: bool,
) -> Result<DescentReport> {
    let consts = theorem_constants(lipschitz, gamma, r)?;
    let mut prev = trace.phi0;
    let mut rows = Vec::with_capacity(trace.rows.len());
    for row in &trace.rows {
        let dz2 = row.z_step_norm * row.z_step_norm;
        let bound = if mismatched {
            let delta = row.delta_k.ok_or(Error::MissingDelta)?;
            prev - consts.mismatched_descent_coefficient() * dz2
                + 3.0 / (8.0 * gamma) * delta * delta
                + 2.0 * r / gamma * delta
        } else {
            prev - consts.exact_descent_coefficient() * dz2
        };
        let tol = INEQUALITY_RTOL * (1.0 + row.phi.abs());
        rows.push(DescentRow {
            k: row.iter,
            phi: row.phi,
            bound,
            satisfied: row.phi <= bound + tol,
        });
        prev = row.phi;
    }
    Ok(DescentReport { mismatched, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// Mismatched denoiser: `(A₁/t)(φ⁰ − φ*) + A₂ ε̄_t`.
    Mismatched,
    /// Exact denoiser: `(C/t)(φ⁰ − φ*)`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub t: usize,
    pub lhs_min: f64,
    pub lhs_mean: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub eps_bar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub constants: TheoremConstants,
    pub phi0: f64,
    pub phi_star: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    /// True when the mean of `‖∇f‖²` stays under the bound at every prefix.
    pub fn all_satisfied(&self) -> bool {
        self.rows.iter().all(|r| r.satisfied)
    }

    pub fn min_is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].lhs_min <= w[0].lhs_min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,lhs_min,lhs_mean,rhs,satisfied,eps_bar\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{},{:.16e}",
                r.t, r.lhs_min, r.lhs_mean, r.rhs, r.satisfied, r.eps_bar
            );
        }
        out
    }

    pub fn summary(&self) -> String {
        let c = &self.constants;
        let worst = self
            .rows
            .iter()
            .map(|r| r.lhs_mean / r.rhs)
            .fold(0.0, f64::max);
        let failed = self.rows.iter().filter(|r| !r.satisfied).count();
        let mut out = String::new();
        let _ = writeln!(out, "theorem      {:?}", self.theorem);
        let _ = writeln!(out, "L            {:.10e}", c.lipschitz);
        let _ = writeln!(out, "gamma        {:.10e}", c.gamma);
        let _ = writeln!(out, "R            {:.10e}", c.r);
        let _ = writeln!(out, "A1           {:.10e}", c.a1);
        let _ = writeln!(out, "A2           {:.10e}", c.a2);
        let _ = writeln!(out, "B            {:.10e}", c.b);
        let _ = writeln!(out, "C            {:.10e}", c.c);
        let _ = writeln!(out, "phi0         {:.10e}", self.phi0);
        let _ = writeln!(out, "phi_star     {:.10e}", self.phi_star);
        if let Some(last) = self.rows.last() {
            let _ = writeln!(out, "eps_bar_t    {:.10e}", last.eps_bar);
        }
        let _ = writeln!(out, "prefixes     {}", self.rows.len());
        let _ = writeln!(out, "violations   {failed}");
        let _ = writeln!(out, "max lhs/rhs  {worst:.6e}");
        out
    }
}

/// Running means of `ε_k = max(δ_k, δ_k²)`.
pub fn eps_bar(deltas: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    deltas
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            acc += d.max(d * d);
            acc / (i + 1) as f64
        })
        .collect()
}

/// Evaluates the stationarity bound at every prefix `t` of the trace.
pub fn check_theorem(
    trace: &SolverTrace,
    constants: &TheoremConstants,
    theorem: Theorem,
    phi_star: f64,
) -> Result<BoundReport> {
    let eps = match theorem {
        Theorem::Mismatched => eps_bar(&trace.deltas().ok_or(Error::MissingDelta)?),
        Theorem::Exact => vec![0.0; trace.rows.len()],
    };
    let gap = trace.phi0 - phi_star;
    let mut min = f64::INFINITY;
    let mut sum = 0.0;
    let mut rows = Vec::with_capacity(trace.rows.len());
    for (i, row) in trace.rows.iter().enumerate() {
        let t = i + 1;
        let g2 = row.grad_f_norm * row.grad_f_norm;
        min = min.min(g2);
        sum += g2;
        let mean = sum / t as f64;
        let rhs = match theorem {
            Theorem::Mismatched => constants.a1 / t as f64 * gap + constants.a2 * eps[i],
            Theorem::Exact => constants.c / t as f64 * gap,
        };
        let tol = INEQUALITY_RTOL * (1.0 + rhs.abs());
        rows.push(BoundRow {
            t,
            lhs_min: min,
            lhs_mean: mean,
            rhs,
            satisfied: mean <= rhs + tol,
            eps_bar: eps[i],
        });
    }
    Ok(BoundReport {
        theorem,
        constants: *constants,
        phi0: trace.phi0,
        phi_star,
        rows,
    })
}

/// `1.1 · max_k ‖z^k − z*‖` over the supplied iterates.
pub fn estimate_r(z_history: &[ImageBuffer], z_star: &ImageBuffer) -> f64 {
    R_SAFETY * z_history.iter().map(|z| z.distance(z_star)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundRow {
    pub k: usize,
    pub phi: f64,
    pub objective: f64,
    pub satisfied: bool,
}

/// `φ(x^k, z^k, s^k) > g(x^k) + h(x^k)` for every kept iterate; needs a
/// trace recorded with `keep_iterates`. Equality within tolerance counts
/// as satisfied once the iterates have converged (`x^k = z^k`).
pub fn check_lower_bound(
    trace: &SolverTrace,
    g: &dyn DataFidelity,
    h: &RegularizerContext,
) -> Result<Vec<LowerBoundRow>> {
    if trace.x_history.len() != trace.rows.len() + 1 {
        return Err(Error::InvalidArgument("trace was recorded without iterates".into()));
    }
    trace
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let f = objective(g, h, &trace.x_history[i + 1])?;
            let tol = INEQUALITY_RTOL * (1.0 + f.abs());
            Ok(LowerBoundRow {
                k: row.iter,
                phi: row.phi,
                objective: f,
                satisfied: row.phi > f || (row.phi - f).abs() <= tol,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_at_reference_point() {
        let c = theorem_constants(1.0, 0.25, 1.0).unwrap();
        assert!((c.a1 - 4.0 * 1.0625f64.powi(2) / (0.25 * 0.375)).abs() < 1e-12);
        assert!((c.a1 - 48.1667).abs() < 1e-4);
        assert!((c.b - 0.8).abs() < 1e-15);
        assert!((c.c - 13.6).abs() < 1e-12);
        assert!((c.a2 - 480.6667).abs() < 1e-4);
    }

    #[test]
    fn constants_reject_large_step() {
        assert!(matches!(theorem_constants(1.0, 0.3, 1.0), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn eps_bar_uses_max_of_delta_and_square() {
        let e = eps_bar(&[0.5, 0.5, 2.0]);
        assert!((e[2] - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(e[0], 0.5);
    }

    #[test]
    fn r_of_converged_history() {
        let z = ImageBuffer::filled(crate::image::Shape::gray(2, 2), 0.3);
        assert_eq!(estimate_r(&[z.clone(), z.clone()], &z), 0.0);
        let far = ImageBuffer::filled(z.shape(), 1.3);
        assert!((estimate_r(&[far, z.clone()], &z) - 1.1 * 2.0).abs() < 1e-12);
    }
}
