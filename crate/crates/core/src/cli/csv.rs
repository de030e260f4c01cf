//! Trace CSV: fixed column order, `{:.16e}` reals (17 significant digits,
//! exact round trip), empty field for a missing value.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::solver::TraceRow;

pub const TRACE_HEADER: &str =
    "iter,sigma_k,phi,grad_f_norm,delta_k,z_step_norm,xz_gap,s_step_norm,psnr,psnr_paper_formula,ssim";

fn real(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.16e}");
}

fn opt(out: &mut String, v: Option<f64>) {
    match v {
        Some(v) => real(out, v),
        None => out.push(','),
    }
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.iter);
        real(&mut out, r.sigma_k);
        real(&mut out, r.phi);
        real(&mut out, r.grad_f_norm);
        opt(&mut out, r.delta_k);
        real(&mut out, r.z_step_norm);
        real(&mut out, r.xz_gap);
        real(&mut out, r.s_step_norm);
        opt(&mut out, r.psnr);
        opt(&mut out, r.psnr_paper_formula);
        opt(&mut out, r.ssim);
        out.push('\n');
    }
    out
}

pub fn trace_from_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(Error::InvalidArgument("trace CSV header does not match".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let bad = |what: &str| Error::InvalidArgument(format!("trace CSV line {}: {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(bad("expected 11 fields"));
            }
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { real(s).map(Some) };
            Ok(TraceRow {
                iter: f[0].parse().map_err(|_| bad("bad iteration index"))?,
                sigma_k: real(f[1])?,
                phi: real(f[2])?,
                grad_f_norm: real(f[3])?,
                delta_k: opt(f[4])?,
                z_step_norm: real(f[5])?,
                xz_gap: real(f[6])?,
                s_step_norm: real(f[7])?,
                psnr: opt(f[8])?,
                psnr_paper_formula: opt(f[9])?,
                ssim: opt(f[10])?,
            })
        })
        .collect()
}
