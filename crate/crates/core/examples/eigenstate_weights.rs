//! Checks the per-term eigenstate weight identity on the Q=4 ground state and
//! prints the weight profile of the hopping terms.

use diabatic_cvqe::fermion::{exact_ground_state_ed, ModelParams};
use diabatic_cvqe::measurement::eigenstate_weight_diagnostic_all;
use diabatic_cvqe::pauli::jordan_wigner;
use diabatic_cvqe::statevector::StateVector;
use num_complex::Complex64;

fn main() -> diabatic_cvqe::error::Result<()> {
    let m = ModelParams { n_orbitals: 4, dmu: 0.75, t: 1.0, v: 1.0 };
    let h = jordan_wigner(&m.model()?);
    let (e, states, vec) = exact_ground_state_ed(&m.model()?, 2)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 16];
    for (s, a) in states.iter().zip(&vec) {
        amps[s.0 as usize] = *a;
    }
    let psi = StateVector::from_amplitudes(4, amps)?;
    println!("ground energy {e:.10}");
    for d in eigenstate_weight_diagnostic_all(&h, &psi)? {
        let heaviest = d.profile.iter().cloned().fold((0.0, 0.0), |a, b| if b.0 > a.0 { b } else { a });
        println!(
            "{:<6} max residual {:.1e} skipped {} heaviest |phi|^2 {:.4} at 1/dE^2 {:.3}",
            h.terms()[d.term].pauli.to_letters(4),
            d.max_residual,
            d.skipped,
            heaviest.0,
            heaviest.1
        );
    }
    Ok(())
}
