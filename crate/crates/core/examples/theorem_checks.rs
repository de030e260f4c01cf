//! Descent and stationarity bounds on the canonical Gaussian instance, for
//! the exact denoiser and for a denoiser whose prior mean is off by one.

use pnp_admm::canonical::{Instance, MISMATCH_SHIFT, SEED};
use pnp_admm::diagnostics::{check_lemma_descent, check_theorem, estimate_r, theorem_constants, Theorem};
use pnp_admm::solver::{ZStep, THEORY_ITERATIONS};

fn main() -> pnp_admm::Result<()> {
    let inst = Instance::gaussian(SEED)?;
    let shifted = inst.shifted_denoiser(MISMATCH_SHIFT)?;
    let cases: [(&str, Option<&dyn ZStep>, Theorem); 2] = [
        ("exact", None, Theorem::Exact),
        ("mismatched", Some(&shifted), Theorem::Mismatched),
    ];
    for (label, step, theorem) in cases {
        let trace = inst.run(step, THEORY_ITERATIONS)?;
        let reference = inst.reference(step)?;
        let r = estimate_r(&trace.z_history, &reference.z_star);
        let mismatched = step.is_some();
        let descent = check_lemma_descent(&trace, inst.lipschitz(), inst.gamma, r, mismatched)?;
        let consts = theorem_constants(inst.lipschitz(), inst.gamma, r)?;
        let bound = check_theorem(&trace, &consts, theorem, reference.phi_star)?;
        println!("== {label}");
        println!("descent violations {}", descent.violations().len());
        print!("{}", bound.summary());
        println!("final grad_f_norm {:.3e}\n", trace.last().grad_f_norm);
    }
    Ok(())
}
