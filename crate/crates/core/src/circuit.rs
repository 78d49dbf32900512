//! Gate-level compilation of Pauli exponentials and of the Trotterized
//! evolution, resource counting, and OpenQASM 2.0 export.
//!
//! `RZ(θ) = exp(−iθZ/2)`, so `exp(iφP)` becomes `RZ(−2φ)` on the last support
//! qubit after the basis change and CNOT parity chain.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CvqeError, Result};
use crate::fermion::BasisState;
use crate::pauli::{Letter, Pauli, PauliHamiltonian};
use crate::statevector::{EvolutionSchedule, InterpolatedHamiltonian, StateVector};

/// Largest register `simulate_circuit` accepts.
pub const SIMULATE_MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase")]
pub enum Gate {
    Rx { qubit: usize, angle: f64 },
    Ry { qubit: usize, angle: f64 },
    Rz { qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
    /// Bit flip, used only to prepare the initial occupation.
    X { qubit: usize },
}

impl Gate {
    fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::Rx { qubit, .. } | Gate::Ry { qubit, .. } | Gate::Rz { qubit, .. } | Gate::X { qubit } => (qubit, None),
            Gate::Cnot { control, target } => (control, Some(target)),
        }
    }

    /// The gate undoing this one.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rx { qubit, angle } => Gate::Rx { qubit, angle: -angle },
            Gate::Ry { qubit, angle } => Gate::Ry { qubit, angle: -angle },
            Gate::Rz { qubit, angle } => Gate::Rz { qubit, angle: -angle },
            g => g,
        }
    }

    fn matrix(&self) -> Option<[[Complex64; 2]; 2]> {
        let half = |a: f64| (a / 2.0).sin_cos();
        let re = |x: f64| Complex64::new(x, 0.0);
        match *self {
            Gate::Rx { angle, .. } => {
                let (s, c) = half(angle);
                let mis = Complex64::new(0.0, -s);
                Some([[re(c), mis], [mis, re(c)]])
            }
            Gate::Ry { angle, .. } => {
                let (s, c) = half(angle);
                Some([[re(c), re(-s)], [re(s), re(c)]])
            }
            Gate::Rz { angle, .. } => {
                let (s, c) = half(angle);
                Some([[Complex64::new(c, -s), re(0.0)], [re(0.0), Complex64::new(c, s)]])
            }
            Gate::X { .. } => Some([[re(0.0), re(1.0)], [re(1.0), re(0.0)]]),
            Gate::Cnot { .. } => None,
        }
    }
}

/// Gates applied in list order, leftmost first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceSummary {
    pub cnot_count: usize,
    pub depth: usize,
    pub gate_count: usize,
    pub n_steps: usize,
    /// Whether an identity term (pure global phase) was left out.
    pub identity_dropped: bool,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            gates: Vec::new(),
        }
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let (a, b) = gate.qubits();
        let bad = a >= self.n_qubits || b.is_some_and(|b| b >= self.n_qubits || b == a);
        let angle_ok = match gate {
            Gate::Rx { angle, .. } | Gate::Ry { angle, .. } | Gate::Rz { angle, .. } => angle.is_finite(),
            _ => true,
        };
        if bad || !angle_ok {
            return Err(CvqeError::InvalidDimension(format!("gate {gate:?} invalid on {} qubits", self.n_qubits)));
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, other: &Circuit) {
        self.gates.extend_from_slice(&other.gates);
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count()
    }

    /// Circuit depth with every gate taking one layer on the qubits it touches.
    pub fn depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        for g in &self.gates {
            match g.qubits() {
                (a, None) => level[a] += 1,
                (a, Some(b)) => {
                    let l = level[a].max(level[b]) + 1;
                    level[a] = l;
                    level[b] = l;
                }
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    /// Reversed gate list with every gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    pub fn resources(&self, n_steps: usize, identity_dropped: bool) -> ResourceSummary {
        ResourceSummary {
            cnot_count: self.cnot_count(),
            depth: self.depth(),
            gate_count: self.len(),
            n_steps,
            identity_dropped,
        }
    }
}

/// Circuit for `exp(iφP)`: basis change, CNOT parity chain onto the last
/// support qubit, `RZ(−2φ)`, mirrored chain, inverse basis change.
pub fn compile_pauli_exponential(n_qubits: usize, p: Pauli, phi: f64) -> Result<Circuit> {
    if p.is_identity() {
        return Err(CvqeError::IdentityString);
    }
    let support = p.support_qubits();
    if support.last().is_some_and(|&q| q >= n_qubits) {
        return Err(CvqeError::DimensionMismatch(format!("string acts beyond {n_qubits} qubits")));
    }
    let mut pre = Vec::new();
    for &q in &support {
        match p.letter(q) {
            Letter::X => pre.push(Gate::Ry { qubit: q, angle: -FRAC_PI_2 }),
            Letter::Y => pre.push(Gate::Rx { qubit: q, angle: FRAC_PI_2 }),
            _ => {}
        }
    }
    let chain: Vec<Gate> = support
        .windows(2)
        .map(|w| Gate::Cnot { control: w[0], target: w[1] })
        .collect();
    let last = *support.last().expect("non-identity string has support");
    let mut c = Circuit::new(n_qubits);
    for g in pre.iter().chain(&chain) {
        c.push(*g)?;
    }
    c.push(Gate::Rz { qubit: last, angle: -2.0 * phi })?;
    for g in chain.iter().rev().chain(pre.iter().rev().map(|g| g.inverse()).collect::<Vec<_>>().iter()) {
        c.push(*g)?;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompiledEvolution {
    pub circuit: Circuit,
    pub resources: ResourceSummary,
}

/// The diabatic evolution as gates: per step, one compiled exponential per
/// non-identity term in the same order `diabatic_evolve` uses. The term
/// `exp(−i c Δτ P)` is compiled with `φ = −c·Δτ`.
pub fn compile_evolution(h0: &PauliHamiltonian, h: &PauliHamiltonian, schedule: EvolutionSchedule) -> Result<CompiledEvolution> {
    let interp = InterpolatedHamiltonian::new(h0, h)?;
    let n = interp.n_qubits();
    let identity_present = h0.terms().iter().chain(h.terms()).any(|t| t.pauli.is_identity());
    let mut circuit = Circuit::new(n);
    if schedule.dt != 0.0 {
        for step in 1..=schedule.n_steps {
            let s = schedule.fraction(step);
            for (p, coeff) in interp.coefficients_at(s) {
                circuit.extend(&compile_pauli_exponential(n, p, -coeff * schedule.dt)?);
            }
        }
    }
    let n_steps = if schedule.dt == 0.0 { 0 } else { schedule.n_steps };
    let resources = circuit.resources(n_steps, identity_present && n_steps > 0);
    Ok(CompiledEvolution { circuit, resources })
}

/// X gates setting the occupied orbitals of `state`.
pub fn preparation_circuit(n_qubits: usize, state: BasisState) -> Result<Circuit> {
    let mut c = Circuit::new(n_qubits);
    for q in state.occupied() {
        c.push(Gate::X { qubit: q })?;
    }
    Ok(c)
}

/// Runs the circuit on a copy of `initial` with the statevector kernels.
pub fn simulate_circuit(c: &Circuit, initial: &StateVector) -> Result<StateVector> {
    if c.n_qubits > SIMULATE_MAX_QUBITS {
        return Err(CvqeError::Capacity {
            what: "circuit simulation qubits",
            requested: c.n_qubits as f64,
            limit: SIMULATE_MAX_QUBITS as f64,
        });
    }
    if c.n_qubits != initial.n_qubits() {
        return Err(CvqeError::DimensionMismatch(format!(
            "circuit on {} qubits, state on {}",
            c.n_qubits,
            initial.n_qubits()
        )));
    }
    let mut s = initial.clone();
    for g in &c.gates {
        match (g, g.matrix()) {
            (Gate::Cnot { control, target }, _) => s.apply_cnot(*control, *target),
            (_, Some(u)) => s.apply_single_qubit(g.qubits().0, u),
            _ => unreachable!(),
        }
    }
    Ok(s)
}

/// OpenQASM 2.0 text: header, `q`/`c` registers, one line per gate, and a
/// final measurement of every qubit.
pub fn emit_qasm(c: &Circuit) -> String {
    let mut out = String::new();
    out.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{}];", c.n_qubits);
    let _ = writeln!(out, "creg c[{}];", c.n_qubits);
    for g in &c.gates {
        let _ = match *g {
            Gate::Rx { qubit, angle } => writeln!(out, "rx({angle}) q[{qubit}];"),
            Gate::Ry { qubit, angle } => writeln!(out, "ry({angle}) q[{qubit}];"),
            Gate::Rz { qubit, angle } => writeln!(out, "rz({angle}) q[{qubit}];"),
            Gate::Cnot { control, target } => writeln!(out, "cx q[{control}],q[{target}];"),
            Gate::X { qubit } => writeln!(out, "x q[{qubit}];"),
        };
    }
    out.push_str("measure q -> c;\n");
    out
}
