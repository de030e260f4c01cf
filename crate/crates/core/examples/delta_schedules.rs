//! Stationarity under perturbed denoisers: summable, non-summable and
//! constant perturbation sizes on the canonical instance.

use pnp_admm::adaptation::{DeltaSchedule, PerturbedDenoiser};
use pnp_admm::canonical::{Instance, SEED};

fn main() -> pnp_admm::Result<()> {
    let inst = Instance::gaussian(SEED)?;
    let schedules = [
        ("0.5/k^2", DeltaSchedule::summable(0.5, 2.0)?),
        ("0.5/k^0.5", DeltaSchedule::non_summable(0.5, 0.5)?),
        ("0.5", DeltaSchedule::constant(0.5)?),
    ];
    println!("{:<10} {:>12} {:>12} {:>12}", "delta_k", "k=10", "k=100", "k=500");
    for (label, schedule) in schedules {
        let step = PerturbedDenoiser::uniform(inst.target.clone(), schedule);
        let trace = inst.run(Some(&step), 500)?;
        let at = |k: usize| trace.rows[k - 1].grad_f_norm;
        println!("{label:<10} {:>12.3e} {:>12.3e} {:>12.3e}", at(10), at(100), at(500));
    }
    Ok(())
}
