//! Compiles a single Pauli exponential and a short diabatic evolution to
//! OpenQASM and prints the resource counts.

use diabatic_cvqe::circuit::{compile_evolution, compile_pauli_exponential, emit_qasm};
use diabatic_cvqe::fermion::ModelParams;
use diabatic_cvqe::pauli::Pauli;
use diabatic_cvqe::statevector::EvolutionSchedule;
use diabatic_cvqe::subspace::Problem;

fn main() -> diabatic_cvqe::error::Result<()> {
    let c = compile_pauli_exponential(4, Pauli::from_letters("XZIY")?, 0.25)?;
    print!("{}", emit_qasm(&c));

    let p = Problem::new(ModelParams { n_orbitals: 6, dmu: 0.75, t: 1.0, v: 1.0 }, 3)?;
    let compiled = compile_evolution(&p.h0, &p.h, EvolutionSchedule::new(5, 0.1)?)?;
    println!("{}", serde_json::to_string_pretty(&compiled.resources).unwrap());
    Ok(())
}
