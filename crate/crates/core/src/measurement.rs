//! Shot collection in rotated bases (method 1) and in the computational
//! basis only (method 2), the term-by-term VQE estimator, the comparison of
//! both methods, and the eigenstate-weight identity check.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Gate;
use crate::error::{CvqeError, Result};
use crate::fermion::BasisState;
use crate::pauli::{Letter, Pauli, PauliHamiltonian};
use crate::statevector::{derive_seed, StateVector};
use crate::subspace::{build_b0_weighted, expand_basis, ground_eigen, project, Origin, Sampling, Selection, SubspaceBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisChange {
    /// `RY(−π/2)`
    XToZ,
    /// `RX(π/2)`
    YToZ,
}

/// Single-qubit layer `R` with `R P R†` a product of Z on the support of `P`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationLayer {
    pub changes: Vec<(usize, BasisChange)>,
}

pub fn diagonalizing_rotation(p: Pauli) -> RotationLayer {
    let changes = p
        .support_qubits()
        .into_iter()
        .filter_map(|q| match p.letter(q) {
            Letter::X => Some((q, BasisChange::XToZ)),
            Letter::Y => Some((q, BasisChange::YToZ)),
            _ => None,
        })
        .collect();
    RotationLayer { changes }
}

impl RotationLayer {
    pub fn is_identity(&self) -> bool {
        self.changes.is_empty()
    }

    pub fn gates(&self) -> Vec<Gate> {
        self.changes
            .iter()
            .map(|&(qubit, c)| match c {
                BasisChange::XToZ => Gate::Ry { qubit, angle: -FRAC_PI_2 },
                BasisChange::YToZ => Gate::Rx { qubit, angle: FRAC_PI_2 },
            })
            .collect()
    }

    /// Qubits whose value is scrambled by the layer.
    pub fn mask(&self) -> u64 {
        self.changes.iter().fold(0, |m, &(q, _)| m | 1 << q)
    }

    pub fn apply(&self, state: &mut StateVector) {
        for &(q, c) in &self.changes {
            state.apply_single_qubit(q, change_matrix(c, false));
        }
    }

    pub fn apply_inverse(&self, state: &mut StateVector) {
        for &(q, c) in self.changes.iter().rev() {
            state.apply_single_qubit(q, change_matrix(c, true));
        }
    }

    /// Dense `R` on `n` qubits.
    pub fn dense(&self, n: usize) -> DMatrix<Complex64> {
        let dim = 1usize << n;
        let mut m = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut s = StateVector::basis(n, BasisState(col as u64)).expect("basis index in range");
            self.apply(&mut s);
            for (row, a) in s.amplitudes().iter().enumerate() {
                m[(row, col)] = *a;
            }
        }
        m
    }
}

fn change_matrix(c: BasisChange, inverse: bool) -> [[Complex64; 2]; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let re = |x: f64| Complex64::new(x, 0.0);
    let sign = if inverse { -1.0 } else { 1.0 };
    match c {
        // RY(∓π/2)
        BasisChange::XToZ => [[re(h), re(sign * h)], [re(-sign * h), re(h)]],
        // RX(±π/2)
        BasisChange::YToZ => {
            let mis = Complex64::new(0.0, -sign * h);
            [[re(h), mis], [mis, re(h)]]
        }
    }
}

/// Eigenvalue sign of the rotated string on outcome `n`.
fn parity_sign(p: Pauli, n: u64) -> f64 {
    if (p.support() & n).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Outcome weights of `state` after `layer`, sampled on stream `index`.
fn rotated_weights(state: &StateVector, layer: &RotationLayer, sampling: Sampling, index: u64) -> Vec<(BasisState, f64)> {
    let mut s = state.clone();
    layer.apply(&mut s);
    let sampling = match sampling {
        Sampling::Shots { shots, seed } => Sampling::Shots {
            shots,
            seed: derive_seed(seed, index),
        },
        exact => exact,
    };
    sampling.weights(&s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermCensus {
    pub string: String,
    pub chi: u32,
    #[serde(rename = "N_r")]
    pub n_r: u64,
    /// Shots spent on the term; 0 when exact distributions were used.
    pub shots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: u8,
    pub per_term: Vec<TermCensus>,
    pub shots_total: u64,
    pub circuits: usize,
    pub b0_size: usize,
    pub basis_size: usize,
    #[serde(rename = "E_B")]
    pub energy: f64,
}

fn shots_of(sampling: Sampling) -> u64 {
    match sampling {
        Sampling::Shots { shots, .. } => shots,
        Sampling::Exact { .. } => 0,
    }
}

fn finish(h: &PauliHamiltonian, basis: &SubspaceBasis) -> Result<f64> {
    Ok(ground_eigen(&project(h, basis)?)?.energy)
}

/// Method 1: per non-identity term, rotate, sample, keep outcomes with
/// frequency above `epsilon`, and back-expand each to the `2^χ` unrotated
/// masks differing on the rotated qubits. With `sector`, states outside that
/// particle number are discarded.
pub fn sample_method1(
    state: &StateVector,
    h: &PauliHamiltonian,
    sampling: Sampling,
    epsilon: f64,
    sector: Option<u32>,
) -> Result<(SubspaceBasis, MethodReport)> {
    let terms: Vec<Pauli> = h.non_identity_terms().map(|t| t.pauli).collect();
    if terms.is_empty() {
        return Err(CvqeError::EmptyBasis("Hamiltonian has no non-identity terms".into()));
    }
    let per_term: Vec<(Vec<BasisState>, TermCensus)> = terms
        .par_iter()
        .enumerate()
        .map(|(l, &p)| {
            let layer = diagonalizing_rotation(p);
            let weights = rotated_weights(state, &layer, sampling, l as u64);
            let total: f64 = weights.iter().map(|w| w.1).sum();
            let kept: Vec<u64> = weights.iter().filter(|w| w.1 / total > epsilon).map(|w| w.0 .0).collect();
            let mask = layer.mask();
            let mut states = Vec::with_capacity(kept.len() << mask.count_ones());
            for n in kept {
                for sub in submasks(mask) {
                    states.push(BasisState((n & !mask) | sub));
                }
            }
            let census = TermCensus {
                string: p.to_letters(h.n_qubits()),
                chi: p.chi(),
                n_r: 1 << p.chi(),
                shots: shots_of(sampling),
            };
            (states, census)
        })
        .collect();
    let mut seen = BTreeSet::new();
    let mut basis = SubspaceBasis::new();
    let mut measured = 0;
    let mut census = Vec::with_capacity(per_term.len());
    for (states, c) in per_term {
        for s in states {
            if sector.is_some_and(|ne| s.particle_count() != ne) || !seen.insert(s) {
                continue;
            }
            basis.push(s, Origin::Measured);
            measured += 1;
        }
        census.push(c);
    }
    if basis.is_empty() {
        return Err(CvqeError::EmptyBasis("method 1 kept no outcomes".into()));
    }
    let energy = finish(h, &basis)?;
    let report = MethodReport {
        method: 1,
        shots_total: shots_of(sampling) * census.len() as u64,
        circuits: census.len(),
        per_term: census,
        b0_size: measured,
        basis_size: basis.len(),
        energy,
    };
    Ok((basis, report))
}

/// All submasks of `mask`, ascending.
fn submasks(mask: u64) -> impl Iterator<Item = u64> {
    let mut next = Some(0u64);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == mask { None } else { Some(((cur | !mask).wrapping_add(1)) & mask) };
        Some(cur)
    })
}

/// Method 2: computational-basis sampling, frequency threshold, one
/// Hamiltonian expansion.
pub fn sample_method2(
    state: &StateVector,
    h: &PauliHamiltonian,
    sampling: Sampling,
    epsilon: f64,
    sector: Option<u32>,
) -> Result<(SubspaceBasis, MethodReport)> {
    let weights = sampling.weights(state);
    let b0 = build_b0_weighted(&weights, Selection::MinFrequency(epsilon))?;
    let mut basis = expand_basis(&b0, h);
    if let Some(ne) = sector {
        basis = basis.restrict_to_sector(ne);
        if basis.is_empty() {
            return Err(CvqeError::EmptyBasis(format!("no selected state has {ne} particles")));
        }
    }
    let energy = finish(h, &basis)?;
    let census = h
        .non_identity_terms()
        .map(|t| TermCensus {
            string: t.pauli.to_letters(h.n_qubits()),
            chi: t.pauli.chi(),
            n_r: 1 << t.pauli.chi(),
            shots: 0,
        })
        .collect();
    let report = MethodReport {
        method: 2,
        per_term: census,
        shots_total: shots_of(sampling),
        circuits: 1,
        b0_size: basis.measured_count(),
        basis_size: basis.len(),
        energy,
    };
    Ok((basis, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqeEstimate {
    pub energy: f64,
    pub std_error: f64,
}

/// Term-by-term VQE estimate: each non-identity term is measured in its own
/// rotated basis with `shots_per_term` shots. The identity coefficient is added
/// exactly. The standard error is the jackknife over single shots, combined
/// across independent terms.
pub fn vqe_expectation_estimate(state: &StateVector, h: &PauliHamiltonian, shots_per_term: u64, seed: u64) -> Result<VqeEstimate> {
    if shots_per_term < 2 {
        return Err(CvqeError::Config("VQE estimate needs at least 2 shots per term".into()));
    }
    let terms: Vec<(Pauli, f64)> = h.non_identity_terms().map(|t| (t.pauli, t.coeff.re)).collect();
    let parts: Vec<(f64, f64)> = terms
        .par_iter()
        .enumerate()
        .map(|(l, &(p, c))| {
            let layer = diagonalizing_rotation(p);
            let sampling = Sampling::Shots { shots: shots_per_term, seed };
            let weights = rotated_weights(state, &layer, sampling, l as u64);
            let n = shots_per_term as f64;
            let plus: f64 = weights.iter().filter(|w| parity_sign(p, w.0 .0) > 0.0).map(|w| w.1).sum();
            let sum = 2.0 * plus - n;
            // leave-one-out means for the two outcome classes
            let drop_plus = (sum - 1.0) / (n - 1.0);
            let drop_minus = (sum + 1.0) / (n - 1.0);
            let minus = n - plus;
            let mean_loo = (plus * drop_plus + minus * drop_minus) / n;
            let var = (n - 1.0) / n * (plus * (drop_plus - mean_loo).powi(2) + minus * (drop_minus - mean_loo).powi(2));
            (c * sum / n, c * c * var)
        })
        .collect();
    let energy = h.identity_coefficient().re + parts.iter().map(|p| p.0).sum::<f64>();
    let std_error = parts.iter().map(|p| p.1).sum::<f64>().sqrt();
    Ok(VqeEstimate { energy, std_error })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    #[serde(rename = "L")]
    pub l: usize,
    pub per_term: Vec<TermCensus>,
    #[serde(rename = "E_B_m1")]
    pub e_b_m1: f64,
    #[serde(rename = "E_B_m2")]
    pub e_b_m2: f64,
    /// `E_B` of method 2 with sixteen times the budget.
    #[serde(rename = "E_B_m2_16x")]
    pub e_b_m2_16x: f64,
    /// `|B̃ ∩ B| / |B̃ ∪ B|`
    pub overlap: f64,
    /// Circuits needed by method 1 per circuit of method 2.
    pub circuit_ratio: usize,
    pub method1: MethodReport,
    pub method2: MethodReport,
    pub method2_16x: MethodReport,
}

/// Method 1 with `budget / L` shots per term against method 2 with the full
/// budget and with sixteen times the budget.
pub fn compare_methods(
    state: &StateVector,
    h: &PauliHamiltonian,
    sampling: Sampling,
    epsilon: f64,
    sector: Option<u32>,
) -> Result<ComparisonReport> {
    let l = h.non_identity_terms().count();
    let (s1, s2, s16) = match sampling {
        Sampling::Shots { shots, seed } => {
            let per = (shots / l.max(1) as u64).max(1);
            (
                Sampling::Shots { shots: per, seed },
                Sampling::Shots { shots, seed: derive_seed(seed, u64::MAX) },
                Sampling::Shots { shots: shots * 16, seed: derive_seed(seed, u64::MAX - 1) },
            )
        }
        exact => (exact, exact, exact),
    };
    let (b1, m1) = sample_method1(state, h, s1, epsilon, sector)?;
    let (b2, m2) = sample_method2(state, h, s2, epsilon, sector)?;
    let (_, m16) = sample_method2(state, h, s16, epsilon, sector)?;
    let (a, b) = (b1.as_set(), b2.as_set());
    let union = a.union(&b).count();
    let overlap = if union == 0 { 1.0 } else { a.intersection(&b).count() as f64 / union as f64 };
    Ok(ComparisonReport {
        l,
        per_term: m1.per_term.clone(),
        e_b_m1: m1.energy,
        e_b_m2: m2.energy,
        e_b_m2_16x: m16.energy,
        overlap,
        circuit_ratio: l,
        method1: m1,
        method2: m2,
        method2_16x: m16,
    })
}

/// Denominators `|E(φ) − E_nl|` at or below this are skipped.
pub const DEGENERACY_GUARD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub n: BasisState,
    /// `φ_nl = ⟨Ψ_nl|Ψ⟩`
    pub phi: Complex64,
    pub e_nl: f64,
    /// Right-hand side of the identity; `None` when skipped.
    pub rhs: Option<Complex64>,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightDiagnostic {
    pub term: usize,
    /// `E(φ) = Σ_l Σ_n E_nl |φ_nl|²`
    pub energy: f64,
    pub rows: Vec<WeightRow>,
    pub max_residual: f64,
    pub skipped: usize,
    /// `(|φ_nl|², 1/|E(φ) − E_nl|²)` for every evaluated row.
    pub profile: Vec<(f64, f64)>,
}

/// Every term's eigenbasis as a dense rotation with its eigenvalues, the
/// identity term included.
struct TermBases {
    rotations: Vec<DMatrix<Complex64>>,
    eigenvalues: Vec<Vec<f64>>,
}

fn term_bases(h: &PauliHamiltonian) -> TermBases {
    let n = h.n_qubits();
    let dim = 1usize << n;
    let (rotations, eigenvalues) = h
        .terms()
        .iter()
        .map(|t| {
            let c = t.coeff.re;
            let e = (0..dim as u64).map(|m| c * parity_sign(t.pauli, m)).collect();
            (diagonalizing_rotation(t.pauli).dense(n), e)
        })
        .unzip();
    TermBases { rotations, eigenvalues }
}

/// Evaluates `φ_nl (E(φ) − E_nl) = Σ_{n'l' ≠ nl} E_n'l' φ_n'l' ζ^{nl}_{n'l'}`
/// for term `term`, where `|Ψ_nl⟩ = R_l†|n⟩` and `ζ^{nl}_{n'l'} =
/// ⟨Ψ_nl|Ψ_n'l'⟩` are taken from dense rotations. Dense, so `Q ≤ 10`.
pub fn eigenstate_weight_diagnostic(h: &PauliHamiltonian, state: &StateVector, term: usize) -> Result<WeightDiagnostic> {
    let all = eigenstate_weight_diagnostic_all(h, state)?;
    all.into_iter()
        .nth(term)
        .ok_or_else(|| CvqeError::InvalidDimension(format!("term index {term} out of range")))
}

/// The diagnostic for every term, sharing the rotated bases.
pub fn eigenstate_weight_diagnostic_all(h: &PauliHamiltonian, state: &StateVector) -> Result<Vec<WeightDiagnostic>> {
    let n = h.n_qubits();
    if n != state.n_qubits() {
        return Err(CvqeError::DimensionMismatch(format!("operator on {n} qubits, state on {}", state.n_qubits())));
    }
    if n > 10 {
        return Err(CvqeError::Capacity {
            what: "dense diagnostic qubits",
            requested: n as f64,
            limit: 10.0,
        });
    }
    let bases = term_bases(h);
    let psi = nalgebra::DVector::from_column_slice(state.amplitudes());
    let phis: Vec<nalgebra::DVector<Complex64>> = bases.rotations.iter().map(|r| r * &psi).collect();
    let energy: f64 = phis
        .iter()
        .zip(&bases.eigenvalues)
        .map(|(phi, e)| phi.iter().zip(e).map(|(a, &v)| v * a.norm_sqr()).sum::<f64>())
        .sum();
    let weighted: Vec<nalgebra::DVector<Complex64>> = phis
        .iter()
        .zip(&bases.eigenvalues)
        .map(|(phi, e)| nalgebra::DVector::from_iterator(phi.len(), phi.iter().zip(e).map(|(a, &v)| a * v)))
        .collect();
    let mut out = Vec::with_capacity(h.len());
    for l in 0..h.len() {
        // Σ_{n'l'} ζ^{nl}_{n'l'} E_n'l' φ_n'l', with ζ = R_l R_l'†
        let mut total = nalgebra::DVector::<Complex64>::zeros(psi.len());
        for lp in 0..h.len() {
            let zeta = &bases.rotations[l] * bases.rotations[lp].adjoint();
            total += zeta * &weighted[lp];
        }
        let mut rows = Vec::with_capacity(psi.len());
        let mut profile = Vec::new();
        let (mut max_residual, mut skipped) = (0.0f64, 0usize);
        for m in 0..psi.len() {
            let phi = phis[l][m];
            let e_nl = bases.eigenvalues[l][m];
            let denom = energy - e_nl;
            let (rhs, residual) = if denom.abs() <= DEGENERACY_GUARD {
                skipped += 1;
                (None, None)
            } else {
                let rhs = (total[m] - weighted[l][m]) / denom;
                let r = (phi - rhs).norm();
                max_residual = max_residual.max(r);
                profile.push((phi.norm_sqr(), 1.0 / (denom * denom)));
                (Some(rhs), Some(r))
            };
            rows.push(WeightRow {
                n: BasisState(m as u64),
                phi,
                e_nl,
                rhs,
                residual,
            });
        }
        out.push(WeightDiagnostic {
            term: l,
            energy,
            rows,
            max_residual,
            skipped,
            profile,
        });
    }
    Ok(out)
}
