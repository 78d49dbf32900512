//! Spinless-fermion chain model, occupation basis states, particle-number
//! sectors, and the two exact ground-energy references (sector exact
//! diagonalization and the single-particle free-fermion sum).
//!
//! Orbital `q` lives in bit `q` of a [`BasisState`] mask. Energies are in
//! units of the hopping scale `t`.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{lowest_eigenpair, SparseHermitian};
use crate::error::{CvqeError, Result};

/// Largest particle-number sector that will be enumerated.
pub const SECTOR_LIMIT: u128 = 10_000_000;

/// Largest orbital count representable in a mask.
pub const MAX_ORBITALS: usize = 64;

/// Occupation bitstring; bit `q` is the occupancy of orbital `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BasisState(pub u64);

impl BasisState {
    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn particle_count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_occupied(self, q: usize) -> bool {
        (self.0 >> q) & 1 == 1
    }

    /// Builds a state from a list of occupied orbitals.
    pub fn from_orbitals(orbitals: &[usize]) -> Self {
        BasisState(orbitals.iter().fold(0u64, |m, &q| m | (1u64 << q)))
    }

    pub fn occupied(self) -> Vec<usize> {
        (0..MAX_ORBITALS).filter(|&q| self.is_occupied(q)).collect()
    }

    /// Bitstring with orbital 0 rightmost, padded to `n` characters.
    pub fn to_bitstring(self, n: usize) -> String {
        (0..n)
            .rev()
            .map(|q| if self.is_occupied(q) { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TermKind {
    /// `n_q`
    Number(usize),
    /// `c†_q c_{q+1} + c†_{q+1} c_q`, stored by its lower orbital.
    Hopping(usize),
    /// `n_q n_{q+1}`, stored by its lower orbital.
    DensityDensity(usize),
}

impl TermKind {
    fn max_orbital(self) -> usize {
        match self {
            TermKind::Number(q) => q,
            TermKind::Hopping(q) | TermKind::DensityDensity(q) => q + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermionTerm {
    pub kind: TermKind,
    pub coefficient: f64,
}

/// Second-quantized Hamiltonian built from number, nearest-neighbor hopping
/// and nearest-neighbor density-density terms. Hermitian by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FermionHamiltonian {
    n_orbitals: usize,
    terms: Vec<FermionTerm>,
}

impl FermionHamiltonian {
    pub fn new(n_orbitals: usize, terms: Vec<FermionTerm>) -> Result<Self> {
        check_orbitals(n_orbitals)?;
        if let Some(bad) = terms.iter().find(|t| t.kind.max_orbital() >= n_orbitals) {
            return Err(CvqeError::InvalidDimension(format!(
                "term {:?} touches an orbital outside 0..{n_orbitals}",
                bad.kind
            )));
        }
        Ok(Self { n_orbitals, terms })
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn terms(&self) -> &[FermionTerm] {
        &self.terms
    }

    /// Applies the Hamiltonian to one occupation state using the canonical
    /// anticommutation rules, with the fermionic sign fixed by ascending
    /// orbital order. Returns `(target, amplitude)` pairs, not merged.
    pub fn apply_to_basis(&self, state: BasisState) -> Vec<(BasisState, f64)> {
        let mut out = Vec::new();
        for term in &self.terms {
            match term.kind {
                TermKind::Number(q) => {
                    if state.is_occupied(q) {
                        out.push((state, term.coefficient));
                    }
                }
                TermKind::DensityDensity(q) => {
                    if state.is_occupied(q) && state.is_occupied(q + 1) {
                        out.push((state, term.coefficient));
                    }
                }
                TermKind::Hopping(q) => {
                    for (dst, src) in [(q, q + 1), (q + 1, q)] {
                        if let Some((s, sign)) = hop(state, dst, src) {
                            out.push((s, sign * term.coefficient));
                        }
                    }
                }
            }
        }
        out
    }

    /// Real symmetric matrix of the Hamiltonian restricted to the given
    /// ordered states, built from [`apply_to_basis`](Self::apply_to_basis).
    pub fn sector_matrix(&self, states: &[BasisState]) -> SparseHermitian {
        let index: std::collections::HashMap<BasisState, usize> =
            states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut triplets = Vec::new();
        for (col, &s) in states.iter().enumerate() {
            for (target, amp) in self.apply_to_basis(s) {
                if let Some(&row) = index.get(&target) {
                    triplets.push((row, col, Complex64::new(amp, 0.0)));
                }
            }
        }
        SparseHermitian::from_triplets(states.len(), triplets)
    }
}

/// `c†_dst c_src |state⟩` with its sign, or `None` if it vanishes.
fn hop(state: BasisState, dst: usize, src: usize) -> Option<(BasisState, f64)> {
    if !state.is_occupied(src) {
        return None;
    }
    let mut s = state.0;
    let mut sign = parity_below(s, src);
    s &= !(1u64 << src);
    if (s >> dst) & 1 == 1 {
        return None;
    }
    sign *= parity_below(s, dst);
    s |= 1u64 << dst;
    Some((BasisState(s), sign))
}

/// `(-1)^(number of occupied orbitals below q)`
fn parity_below(mask: u64, q: usize) -> f64 {
    let below = if q == 0 { 0 } else { mask & ((1u64 << q) - 1) };
    if below.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_orbitals(n_orbitals: usize) -> Result<()> {
    if n_orbitals == 0 {
        return Err(CvqeError::InvalidDimension("orbital count must be at least 1".into()));
    }
    if n_orbitals > MAX_ORBITALS {
        return Err(CvqeError::InvalidDimension(format!(
            "orbital count {n_orbitals} exceeds {MAX_ORBITALS}"
        )));
    }
    Ok(())
}

fn check_filling(n_orbitals: usize, n_electrons: usize) -> Result<()> {
    if n_electrons > n_orbitals {
        return Err(CvqeError::InvalidFilling {
            orbitals: n_orbitals,
            electrons: n_electrons,
        });
    }
    Ok(())
}

/// Model parameters in units of `t`. Serializes as `{Q, dmu, t, V}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "Q")]
    pub n_orbitals: usize,
    pub dmu: f64,
    pub t: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

impl ModelParams {
    pub fn model(&self) -> Result<FermionHamiltonian> {
        build_model_hamiltonian(self.n_orbitals, self.dmu, self.t, self.v)
    }

    pub fn initial(&self) -> Result<FermionHamiltonian> {
        build_initial_hamiltonian(self.n_orbitals, self.dmu)
    }
}

/// `dmu Σ q n_q − t Σ (c†_q c_{q+1} + h.c.) + V Σ n_q n_{q+1}`
pub fn build_model_hamiltonian(
    n_orbitals: usize,
    dmu: f64,
    t: f64,
    v: f64,
) -> Result<FermionHamiltonian> {
    check_orbitals(n_orbitals)?;
    let mut terms: Vec<FermionTerm> = (0..n_orbitals)
        .map(|q| FermionTerm {
            kind: TermKind::Number(q),
            coefficient: q as f64 * dmu,
        })
        .collect();
    for q in 0..n_orbitals - 1 {
        terms.push(FermionTerm {
            kind: TermKind::Hopping(q),
            coefficient: -t,
        });
    }
    for q in 0..n_orbitals - 1 {
        terms.push(FermionTerm {
            kind: TermKind::DensityDensity(q),
            coefficient: v,
        });
    }
    FermionHamiltonian::new(n_orbitals, terms)
}

/// `dmu Σ q n_q`, diagonal in the occupation basis.
pub fn build_initial_hamiltonian(n_orbitals: usize, dmu: f64) -> Result<FermionHamiltonian> {
    build_model_hamiltonian(n_orbitals, dmu, 0.0, 0.0).map(|h| {
        let terms = h
            .terms
            .into_iter()
            .filter(|t| matches!(t.kind, TermKind::Number(_)))
            .collect();
        FermionHamiltonian {
            n_orbitals: h.n_orbitals,
            terms,
        }
    })
}

/// Lowest `n_electrons` orbitals filled.
pub fn initial_state(n_orbitals: usize, n_electrons: usize) -> Result<BasisState> {
    check_filling(n_orbitals, n_electrons)?;
    let mask = if n_electrons == 64 {
        u64::MAX
    } else {
        (1u64 << n_electrons) - 1
    };
    Ok(BasisState(mask))
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All masks with `n_electrons` bits set, ascending.
pub fn sector_states(n_orbitals: usize, n_electrons: usize) -> Result<Vec<BasisState>> {
    check_orbitals(n_orbitals)?;
    check_filling(n_orbitals, n_electrons)?;
    let count = binomial(n_orbitals, n_electrons);
    if count > SECTOR_LIMIT {
        return Err(CvqeError::Capacity {
            what: "particle-number sector",
            requested: count as f64,
            limit: SECTOR_LIMIT as f64,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    if n_electrons == 0 {
        out.push(BasisState(0));
        return Ok(out);
    }
    let limit: u128 = 1u128 << n_orbitals;
    let mut m: u64 = (1u64 << n_electrons).wrapping_sub(1);
    if n_electrons == 64 {
        m = u64::MAX;
    }
    // Gosper's hack: next larger integer with the same popcount
    loop {
        out.push(BasisState(m));
        if out.len() as u128 == count {
            break;
        }
        let c = m & m.wrapping_neg();
        let r = m.wrapping_add(c);
        m = (((r ^ m) >> 2) / c) | r;
        debug_assert!((m as u128) < limit);
    }
    Ok(out)
}

/// Lowest eigenvalue of `h` on the `n_electrons` sector, from the
/// second-quantized matrix.
pub fn exact_ground_energy_ed(h: &FermionHamiltonian, n_electrons: usize) -> Result<f64> {
    Ok(exact_ground_state_ed(h, n_electrons)?.0)
}

/// Sector ground energy plus its eigenvector over [`sector_states`] order.
pub fn exact_ground_state_ed(
    h: &FermionHamiltonian,
    n_electrons: usize,
) -> Result<(f64, Vec<BasisState>, Vec<Complex64>)> {
    let states = sector_states(h.n_orbitals(), n_electrons)?;
    let m = h.sector_matrix(&states);
    let pair = lowest_eigenpair(&m)?;
    Ok((pair.value, states, pair.vector))
}

/// Sum of the `n_electrons` lowest eigenvalues of the single-particle
/// tridiagonal matrix (diagonal `q·dmu`, off-diagonal `−t`). Exact ground
/// energy of the model at `V = 0`.
pub fn free_fermion_energy(n_orbitals: usize, dmu: f64, t: f64, n_electrons: usize) -> Result<f64> {
    check_orbitals(n_orbitals)?;
    check_filling(n_orbitals, n_electrons)?;
    let diag: Vec<f64> = (0..n_orbitals).map(|q| q as f64 * dmu).collect();
    let off = vec![-t; n_orbitals.saturating_sub(1)];
    Ok(tridiagonal_eigenvalues(&diag, &off)[..n_electrons].iter().sum())
}

/// Eigenvalues of a real symmetric tridiagonal matrix by Sturm-sequence
/// bisection, ascending.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Vec<f64> {
    let n = diag.len();
    assert_eq!(off.len(), n.saturating_sub(1));
    let radius = |i: usize| {
        let l = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let r = if i + 1 < n { off[i].abs() } else { 0.0 };
        l + r
    };
    let lo0 = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let hi0 = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let span = (hi0 - lo0).abs().max(1.0);

    // number of eigenvalues strictly below x
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
            d = diag[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * span;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };

    (0..n)
        .map(|k| {
            let (mut lo, mut hi) = (lo0 - 1e-12 * span, hi0 + 1e-12 * span);
            while hi - lo > 4.0 * f64::EPSILON * span {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if count_below(mid) > k {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}
