//! Builds the chain Hamiltonian, maps it to Pauli strings and checks the
//! sector ground energy against the second-quantized matrix.

use diabatic_cvqe::fermion::{exact_ground_energy_ed, ModelParams};
use diabatic_cvqe::pauli::jordan_wigner;
use diabatic_cvqe::subspace::{ground_eigen, project, Origin, SubspaceBasis};

fn main() -> diabatic_cvqe::error::Result<()> {
    let m = ModelParams { n_orbitals: 6, dmu: 0.75, t: 1.0, v: 1.0 };
    let f = m.model()?;
    let h = jordan_wigner(&f);
    println!("{} Pauli terms on {} qubits", h.len(), h.n_qubits());
    for term in h.terms() {
        println!("  {}", term.format(h.n_qubits()));
    }
    let states = diabatic_cvqe::fermion::sector_states(6, 3)?;
    let e_jw = ground_eigen(&project(&h, &SubspaceBasis::from_states(states, Origin::Measured))?)?.energy;
    let e_ed = exact_ground_energy_ed(&f, 3)?;
    println!("sector ground energy: JW {e_jw:.12}, second-quantized {e_ed:.12}");
    Ok(())
}
