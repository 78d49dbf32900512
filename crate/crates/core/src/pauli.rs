//! Bit-mask Pauli strings, the Jordan–Wigner image of the fermion model, and
//! matrix elements between occupation states computed without forming any
//! `2^Q` matrix.
//!
//! A qubit carries X when only its `x_mask` bit is set, Z when only its
//! `z_mask` bit is set, and Y when both are set, with `Y = i·X·Z`. Acting on a
//! computational basis state,
//!
//! ```text
//! P |m⟩ = i^popcount(x & z) · (−1)^popcount(z & m) · |m ⊕ x⟩
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::SparseHermitian;
use crate::error::{CvqeError, Result};
use crate::fermion::{BasisState, FermionHamiltonian, TermKind};

/// Couplings below this magnitude are treated as zero when growing a basis.
pub const COUPLING_CUTOFF: f64 = 1e-12;

/// Merged coefficients below this magnitude are dropped.
pub const MERGE_CUTOFF: f64 = 1e-15;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Unit-coefficient Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pauli {
    pub x_mask: u64,
    pub z_mask: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Letter {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const IDENTITY: Pauli = Pauli { x_mask: 0, z_mask: 0 };

    pub fn new(x_mask: u64, z_mask: u64) -> Self {
        Self { x_mask, z_mask }
    }

    pub fn x(q: usize) -> Self {
        Self::new(1 << q, 0)
    }

    pub fn y(q: usize) -> Self {
        Self::new(1 << q, 1 << q)
    }

    pub fn z(q: usize) -> Self {
        Self::new(0, 1 << q)
    }

    /// Parses letters `I/X/Y/Z`, character `k` acting on qubit `k`.
    pub fn from_letters(s: &str) -> Result<Self> {
        let mut p = Pauli::IDENTITY;
        for (q, ch) in s.chars().filter(|c| !c.is_whitespace()).enumerate() {
            let bit = 1u64 << q;
            match ch.to_ascii_uppercase() {
                'I' => {}
                'X' => p.x_mask |= bit,
                'Y' => {
                    p.x_mask |= bit;
                    p.z_mask |= bit
                }
                'Z' => p.z_mask |= bit,
                other => {
                    return Err(CvqeError::Config(format!("bad Pauli letter {other:?} in {s:?}")))
                }
            }
        }
        Ok(p)
    }

    /// Product of two operators acting on disjoint or overlapping qubits.
    pub fn times(self, other: Pauli) -> Pauli {
        Pauli::new(self.x_mask ^ other.x_mask, self.z_mask ^ other.z_mask)
    }

    pub fn letter(self, q: usize) -> Letter {
        match ((self.x_mask >> q) & 1, (self.z_mask >> q) & 1) {
            (0, 0) => Letter::I,
            (1, 0) => Letter::X,
            (1, 1) => Letter::Y,
            _ => Letter::Z,
        }
    }

    pub fn support(self) -> u64 {
        self.x_mask | self.z_mask
    }

    pub fn weight(self) -> u32 {
        self.support().count_ones()
    }

    /// Number of X and Y factors.
    pub fn chi(self) -> u32 {
        self.x_mask.count_ones()
    }

    pub fn is_identity(self) -> bool {
        self.support() == 0
    }

    pub fn is_diagonal(self) -> bool {
        self.x_mask == 0
    }

    pub fn support_qubits(self) -> Vec<usize> {
        let s = self.support();
        (0..64).filter(|&q| (s >> q) & 1 == 1).collect()
    }

    /// `i^popcount(x & z)`
    pub fn y_phase(self) -> Complex64 {
        match (self.x_mask & self.z_mask).count_ones() % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => I,
            2 => Complex64::new(-1.0, 0.0),
            _ => -I,
        }
    }

    /// `P|m⟩ = phase · |target⟩`
    #[inline]
    pub fn apply(self, m: u64) -> (u64, Complex64) {
        let sign = if (self.z_mask & m).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        (m ^ self.x_mask, self.y_phase() * sign)
    }

    /// Text form over `n` qubits, e.g. `X Z I Y`.
    pub fn to_letters(self, n: usize) -> String {
        (0..n)
            .map(|q| match self.letter(q) {
                Letter::I => "I",
                Letter::X => "X",
                Letter::Y => "Y",
                Letter::Z => "Z",
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Canonical ordering: diagonal terms (identity first) before
    /// off-diagonal ones, then by lowest support qubit.
    pub(crate) fn order_key(self) -> (bool, bool, u32, u64, u64) {
        (
            !self.is_diagonal(),
            !self.is_identity(),
            self.support().trailing_zeros(),
            self.x_mask,
            self.z_mask,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauliString {
    pub pauli: Pauli,
    pub coeff: Complex64,
}

impl PauliString {
    pub fn new(pauli: Pauli, coeff: impl Into<Complex64>) -> Self {
        Self {
            pauli,
            coeff: coeff.into(),
        }
    }

    pub fn x_mask(&self) -> u64 {
        self.pauli.x_mask
    }

    pub fn z_mask(&self) -> u64 {
        self.pauli.z_mask
    }

    /// Debug form `±c · P_0 P_1 ... P_{n-1}`.
    pub fn format(&self, n: usize) -> String {
        let letters = self.pauli.to_letters(n);
        if self.coeff.im == 0.0 {
            let sign = if self.coeff.re.is_sign_negative() { '-' } else { '+' };
            format!("{sign}{} · {letters}", self.coeff.re.abs())
        } else {
            format!("+({}{:+}i) · {letters}", self.coeff.re, self.coeff.im)
        }
    }
}

/// Sum of Pauli strings with distinct operators, kept in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliHamiltonian {
    n_qubits: usize,
    terms: Vec<PauliString>,
    /// x-mask → (z-mask, coefficient) for every term sharing that flip pattern
    groups: BTreeMap<u64, Vec<(u64, Complex64)>>,
}

impl PauliHamiltonian {
    /// Merges duplicate operators and drops vanishing coefficients. The
    /// identity term is kept whenever it is present in the input so that
    /// diagonal elements stay explicit.
    pub fn new(n_qubits: usize, terms: impl IntoIterator<Item = PauliString>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 64 {
            return Err(CvqeError::InvalidDimension(format!("qubit count {n_qubits}")));
        }
        let mut merged: BTreeMap<Pauli, Complex64> = BTreeMap::new();
        for t in terms {
            if n_qubits < 64 && t.pauli.support() >> n_qubits != 0 {
                return Err(CvqeError::InvalidDimension(format!(
                    "term {} acts outside {n_qubits} qubits",
                    t.format(64)
                )));
            }
            *merged.entry(t.pauli).or_default() += t.coeff;
        }
        let mut terms: Vec<PauliString> = merged
            .into_iter()
            .filter(|(p, c)| p.is_identity() || c.norm() >= MERGE_CUTOFF)
            .map(|(pauli, coeff)| PauliString { pauli, coeff })
            .collect();
        terms.sort_by_key(|t| t.pauli.order_key());
        let mut groups: BTreeMap<u64, Vec<(u64, Complex64)>> = BTreeMap::new();
        for t in &terms {
            groups.entry(t.pauli.x_mask).or_default().push((t.pauli.z_mask, t.coeff));
        }
        Ok(Self {
            n_qubits,
            terms,
            groups,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms other than the identity.
    pub fn non_identity_terms(&self) -> impl Iterator<Item = &PauliString> {
        self.terms.iter().filter(|t| !t.pauli.is_identity())
    }

    pub fn identity_coefficient(&self) -> Complex64 {
        self.terms
            .iter()
            .find(|t| t.pauli.is_identity())
            .map(|t| t.coeff)
            .unwrap_or_default()
    }

    /// Distinct flip patterns, ascending.
    pub fn x_masks(&self) -> impl Iterator<Item = u64> + '_ {
        self.groups.keys().copied()
    }

    pub fn is_diagonal(&self) -> bool {
        self.groups.keys().all(|&x| x == 0)
    }

    /// Fails if any coefficient has a non-negligible imaginary part.
    pub fn check_hermitian(&self) -> Result<()> {
        match self.terms.iter().find(|t| t.coeff.im.abs() > 1e-12) {
            Some(t) => Err(CvqeError::NonHermitian {
                term: t.format(self.n_qubits),
                imag: t.coeff.im,
            }),
            None => Ok(()),
        }
    }

    /// `⟨n|H|m⟩`
    pub fn matrix_element(&self, n: BasisState, m: BasisState) -> Complex64 {
        match self.groups.get(&(n.0 ^ m.0)) {
            Some(group) => group_amplitude(n.0 ^ m.0, group, m.0),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// All states reached from `n` with a coupling above [`COUPLING_CUTOFF`].
    pub fn coupled_states(&self, n: BasisState) -> BTreeSet<BasisState> {
        self.groups
            .iter()
            .filter(|(&x, group)| group_amplitude(x, group, n.0).norm() > COUPLING_CUTOFF)
            .map(|(&x, _)| BasisState(n.0 ^ x))
            .collect()
    }

    /// `output = H · input` on a dense amplitude vector of length `2^Q`.
    pub fn apply(&self, input: &[Complex64], output: &mut [Complex64]) {
        debug_assert_eq!(input.len(), 1usize << self.n_qubits);
        output.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for t in &self.terms {
            let yph = t.pauli.y_phase() * t.coeff;
            let (x, z) = (t.pauli.x_mask as usize, t.pauli.z_mask as usize);
            for (m, a) in input.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let amp = if (z & m).count_ones() % 2 == 0 { yph } else { -yph };
                output[m ^ x] += amp * a;
            }
        }
    }

    /// Dense `2^Q × 2^Q` matrix. Intended for small verification sizes.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for t in &self.terms {
            for col in 0..dim {
                let (row, ph) = t.pauli.apply(col as u64);
                m[(row as usize, col)] += t.coeff * ph;
            }
        }
        m
    }

    /// Sparse matrix over the full `2^Q` register.
    pub fn to_sparse(&self) -> SparseHermitian {
        let dim = 1usize << self.n_qubits;
        let mut triplets = Vec::new();
        for m in 0..dim as u64 {
            for (&x, group) in &self.groups {
                let amp = group_amplitude(x, group, m);
                if amp.re != 0.0 || amp.im != 0.0 {
                    triplets.push(((m ^ x) as usize, m as usize, amp));
                }
            }
        }
        SparseHermitian::from_triplets(dim, triplets)
    }

    /// Scalar combination `a·self + b·other` over the union of terms.
    pub fn combine(&self, a: f64, other: &PauliHamiltonian, b: f64) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(CvqeError::DimensionMismatch(format!(
                "{} vs {} qubits",
                self.n_qubits, other.n_qubits
            )));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| PauliString::new(t.pauli, t.coeff * a))
            .chain(other.terms.iter().map(|t| PauliString::new(t.pauli, t.coeff * b)));
        Self::new(self.n_qubits, terms)
    }
}

fn group_amplitude(x: u64, group: &[(u64, Complex64)], m: u64) -> Complex64 {
    group
        .iter()
        .map(|&(z, c)| Pauli::new(x, z).apply(m).1 * c)
        .sum()
}

impl fmt::Display for PauliHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.terms {
            writeln!(f, "{}", t.format(self.n_qubits))?;
        }
        Ok(())
    }
}

/// Jordan–Wigner image of the fermion model. All terms are nearest-neighbor,
/// so no interior Z strings appear.
pub fn jordan_wigner(h: &FermionHamiltonian) -> PauliHamiltonian {
    let mut out = Vec::new();
    for term in h.terms() {
        let c = term.coefficient;
        match term.kind {
            TermKind::Number(q) => {
                out.push(PauliString::new(Pauli::IDENTITY, c / 2.0));
                out.push(PauliString::new(Pauli::z(q), -c / 2.0));
            }
            TermKind::Hopping(q) => {
                out.push(PauliString::new(Pauli::x(q).times(Pauli::x(q + 1)), c / 2.0));
                out.push(PauliString::new(Pauli::y(q).times(Pauli::y(q + 1)), c / 2.0));
            }
            TermKind::DensityDensity(q) => {
                let quarter = c / 4.0;
                out.push(PauliString::new(Pauli::IDENTITY, quarter));
                out.push(PauliString::new(Pauli::z(q), -quarter));
                out.push(PauliString::new(Pauli::z(q + 1), -quarter));
                out.push(PauliString::new(Pauli::z(q).times(Pauli::z(q + 1)), quarter));
            }
        }
    }
    PauliHamiltonian::new(h.n_orbitals(), out).expect("fermion Hamiltonian has a valid size")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::{build_initial_hamiltonian, build_model_hamiltonian, FermionTerm};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Dense single-qubit Kronecker construction, qubit 0 least significant.
    fn kron_dense(p: Pauli, n: usize) -> DMatrix<Complex64> {
        let one = |l: Letter| -> DMatrix<Complex64> {
            let (a, b, cc, d) = match l {
                Letter::I => (c(1.0), c(0.0), c(0.0), c(1.0)),
                Letter::X => (c(0.0), c(1.0), c(1.0), c(0.0)),
                Letter::Y => (c(0.0), -I, I, c(0.0)),
                Letter::Z => (c(1.0), c(0.0), c(0.0), c(-1.0)),
            };
            DMatrix::from_row_slice(2, 2, &[a, b, cc, d])
        };
        let mut m = one(p.letter(n - 1));
        for q in (0..n - 1).rev() {
            m = m.kronecker(&one(p.letter(q)));
        }
        m
    }

    #[test]
    fn y_phase_convention_matches_kronecker() {
        for n in 1..=4usize {
            for x in 0..(1u64 << n) {
                for z in 0..(1u64 << n) {
                    let p = Pauli::new(x, z);
                    let h = PauliHamiltonian::new(n, [PauliString::new(p, 1.0)]).unwrap();
                    let diff = (h.to_dense() - kron_dense(p, n)).norm();
                    assert!(diff < 1e-14, "{} mismatch", p.to_letters(n));
                }
            }
        }
    }

    #[test]
    fn jw_number_term() {
        let h = FermionHamiltonian::new(
            3,
            vec![FermionTerm { kind: TermKind::Number(1), coefficient: 0.6 }],
        )
        .unwrap();
        let p = jordan_wigner(&h);
        assert_eq!(
            p.terms(),
            &[PauliString::new(Pauli::IDENTITY, 0.3), PauliString::new(Pauli::z(1), -0.3)]
        );
    }

    #[test]
    fn jw_hopping_term() {
        let h = FermionHamiltonian::new(
            2,
            vec![FermionTerm { kind: TermKind::Hopping(0), coefficient: -1.0 }],
        )
        .unwrap();
        let p = jordan_wigner(&h);
        assert_eq!(
            p.terms(),
            &[
                PauliString::new(Pauli::from_letters("XX").unwrap(), -0.5),
                PauliString::new(Pauli::from_letters("YY").unwrap(), -0.5),
            ]
        );
    }

    #[test]
    fn jw_density_term() {
        let h = FermionHamiltonian::new(
            2,
            vec![FermionTerm { kind: TermKind::DensityDensity(0), coefficient: 2.0 }],
        )
        .unwrap();
        let p = jordan_wigner(&h);
        assert_eq!(
            p.terms(),
            &[
                PauliString::new(Pauli::IDENTITY, 0.5),
                PauliString::new(Pauli::z(0), -0.5),
                PauliString::new(Pauli::from_letters("ZZ").unwrap(), 0.5),
                PauliString::new(Pauli::z(1), -0.5),
            ]
        );
    }

    #[test]
    fn model_term_count() {
        for q in 2..10 {
            let h = jordan_wigner(&build_model_hamiltonian(q, 0.75, 1.0, 1.0).unwrap());
            assert_eq!(h.len(), 1 + q + 2 * (q - 1) + (q - 1));
        }
    }

    #[test]
    fn diagonal_and_hop_elements_q8_model() {
        let h = jordan_wigner(&build_model_hamiltonian(8, 0.75, 1.0, 1.0).unwrap());
        let phi0 = BasisState::from_orbitals(&[0, 1, 2, 3]);
        let e = h.matrix_element(phi0, phi0);
        assert!((e - c(7.5)).norm() < 1e-13);
        let hop = BasisState::from_orbitals(&[0, 1, 2, 4]);
        assert!((h.matrix_element(hop, phi0) - c(-1.0)).norm() < 1e-13);
        let far = BasisState::from_orbitals(&[0, 1, 5, 6]);
        assert_eq!(h.matrix_element(far, phi0), c(0.0));
    }

    #[test]
    fn coupled_states_of_filled_block() {
        let h = jordan_wigner(&build_model_hamiltonian(8, 0.75, 1.0, 1.0).unwrap());
        let phi0 = BasisState::from_orbitals(&[0, 1, 2, 3]);
        let got: Vec<_> = h.coupled_states(phi0).into_iter().collect();
        assert_eq!(got, vec![phi0, BasisState::from_orbitals(&[0, 1, 2, 4])]);

        let h0 = jordan_wigner(&build_initial_hamiltonian(8, 0.75).unwrap());
        let n = BasisState(0b1010_0110);
        assert_eq!(h0.coupled_states(n).into_iter().collect::<Vec<_>>(), vec![n]);
    }

    #[test]
    fn text_format() {
        let s = PauliString::new(Pauli::from_letters("XIZY").unwrap(), -0.25);
        assert_eq!(s.format(4), "-0.25 · X I Z Y");
        let s = PauliString::new(Pauli::z(0), 1.5);
        assert_eq!(s.format(2), "+1.5 · Z I");
    }

    #[test]
    fn combine_and_mismatch() {
        let a = PauliHamiltonian::new(2, [PauliString::new(Pauli::z(0), 1.0)]).unwrap();
        let b = PauliHamiltonian::new(2, [PauliString::new(Pauli::z(0), 1.0)]).unwrap();
        assert!(a.combine(1.0, &b, -1.0).unwrap().is_empty());
        let c3 = PauliHamiltonian::new(3, []).unwrap();
        assert!(matches!(a.combine(1.0, &c3, 1.0), Err(CvqeError::DimensionMismatch(_))));
    }

    #[test]
    fn out_of_range_term_rejected() {
        let r = PauliHamiltonian::new(2, [PauliString::new(Pauli::z(2), 1.0)]);
        assert!(matches!(r, Err(CvqeError::InvalidDimension(_))));
    }

    #[test]
    fn non_hermitian_detected() {
        let h = PauliHamiltonian::new(1, [PauliString::new(Pauli::x(0), Complex64::new(0.0, 1.0))])
            .unwrap();
        assert!(h.check_hermitian().is_err());
    }
}
