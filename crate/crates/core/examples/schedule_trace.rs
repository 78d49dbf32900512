//! Guiding-state and measured-subspace energies along a step-count sweep at
//! fixed Δτ, for the Q=8 half-filled chain.

use diabatic_cvqe::fermion::{exact_ground_energy_ed, ModelParams};
use diabatic_cvqe::statevector::EvolutionSchedule;
use diabatic_cvqe::subspace::{run_problem, Problem, Sampling, Selection};

fn main() -> diabatic_cvqe::error::Result<()> {
    let m = ModelParams { n_orbitals: 8, dmu: 0.75, t: 1.0, v: 1.0 };
    let p = Problem::new(m, 4)?;
    let ed = exact_ground_energy_ed(&m.model()?, 4)?;
    println!("E_ED = {ed:.10}");
    println!("{:>6} {:>12} {:>12} {:>5} {:>5}", "N_tau", "E_guiding", "E_B", "|B0|", "|B|");
    for n in [10, 25, 50, 100, 250, 500] {
        let sched = EvolutionSchedule::new(n, 1.0 / 15.0)?;
        let r = run_problem(&p, sched, Sampling::Shots { shots: 4096, seed: 7 }, Selection::TopK(14), 1)?;
        println!("{n:>6} {:>12.6} {:>12.6} {:>5} {:>5}", r.guiding_energy, r.energy(), r.solve.b0_size, r.solve.basis_size);
    }
    Ok(())
}
