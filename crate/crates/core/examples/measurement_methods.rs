//! Rotated-basis sampling of every term against computational-basis sampling
//! followed by one expansion, on a Q=4 guiding state.

use diabatic_cvqe::fermion::ModelParams;
use diabatic_cvqe::measurement::compare_methods;
use diabatic_cvqe::statevector::EvolutionSchedule;
use diabatic_cvqe::subspace::{Problem, Sampling};

fn main() -> diabatic_cvqe::error::Result<()> {
    let p = Problem::new(ModelParams { n_orbitals: 4, dmu: 0.5, t: 1.0, v: 1.0 }, 2)?;
    let state = p.guiding_state(EvolutionSchedule::new(20, 0.1)?)?;
    for budget in [256, 4096] {
        let r = compare_methods(&state, &p.h, Sampling::Shots { shots: budget, seed: 3 }, 1e-3, Some(2))?;
        println!(
            "budget {budget:>5}: L={} E_B(m1)={:.8} E_B(m2)={:.8} E_B(m2,16x)={:.8} overlap={:.3}",
            r.l, r.e_b_m1, r.e_b_m2, r.e_b_m2_16x, r.overlap
        );
        for t in &r.per_term {
            println!("    {} chi={} N_r={}", t.string, t.chi, t.n_r);
        }
    }
    Ok(())
}
