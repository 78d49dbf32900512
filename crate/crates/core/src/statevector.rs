//! Dense statevector engine: Pauli-exponential kernels, Trotterized evolution
//! under the linearly interpolated Hamiltonian, an adaptive-step reference
//! integrator, expectation values and seeded multinomial sampling.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::eigen::SparseHermitian;
use crate::error::{CvqeError, Result};
use crate::fermion::BasisState;
use crate::pauli::{Pauli, PauliHamiltonian};

/// Largest register held as a dense amplitude array.
pub const MAX_QUBITS: usize = 26;

/// Largest register accepted by [`reference_evolution`].
pub const REFERENCE_MAX_QUBITS: usize = 12;

/// Shot counts keyed by measured basis state.
pub type Counts = BTreeMap<BasisState, u64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

fn check_qubits(n_qubits: usize, limit: usize) -> Result<()> {
    if n_qubits == 0 {
        return Err(CvqeError::InvalidDimension("register needs at least one qubit".into()));
    }
    if n_qubits > limit {
        return Err(CvqeError::Capacity {
            what: "dense statevector qubits",
            requested: n_qubits as f64,
            limit: limit as f64,
        });
    }
    Ok(())
}

impl StateVector {
    /// Unit amplitude on `state`.
    pub fn basis(n_qubits: usize, state: BasisState) -> Result<Self> {
        check_qubits(n_qubits, MAX_QUBITS)?;
        if n_qubits < 64 && state.0 >> n_qubits != 0 {
            return Err(CvqeError::InvalidDimension(format!(
                "basis state {state} does not fit in {n_qubits} qubits"
            )));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[state.0 as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Normalizes the given amplitudes.
    pub fn from_amplitudes(n_qubits: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits, MAX_QUBITS)?;
        if amps.len() != 1 << n_qubits {
            return Err(CvqeError::DimensionMismatch(format!(
                "{} amplitudes for {n_qubits} qubits",
                amps.len()
            )));
        }
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(CvqeError::InvalidDimension("state has zero norm".into()));
        }
        amps.iter_mut().for_each(|a| *a /= n);
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `(state, probability)` for every outcome with probability above `floor`.
    pub fn distribution(&self, floor: f64) -> Vec<(BasisState, f64)> {
        self.amps
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                let p = a.norm_sqr();
                (p > floor).then_some((BasisState(i as u64), p))
            })
            .collect()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Phase-insensitive overlap `|⟨self|other⟩|`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm()
    }

    /// Total probability outside the given particle-number sector.
    pub fn sector_leakage(&self, particles: u32) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (*i as u64).count_ones() != particles)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// `|ψ⟩ ← exp(−iθP)|ψ⟩` for a unit-coefficient Pauli operator, via the
    /// two-element rotation on amplitudes paired by the flip mask.
    pub fn apply_pauli_exponential(&mut self, p: Pauli, theta: f64) {
        let (s, c) = theta.sin_cos();
        let yph = p.y_phase();
        let x = p.x_mask as usize;
        let z = p.z_mask as usize;
        let phase = |m: usize| if (z & m).count_ones() % 2 == 0 { yph } else { -yph };
        let mis = Complex64::new(0.0, -s);
        if x == 0 {
            for (m, a) in self.amps.iter_mut().enumerate() {
                *a *= c + mis * phase(m);
            }
            return;
        }
        let top = 1usize << (usize::BITS - 1 - x.leading_zeros());
        for m in 0..self.amps.len() {
            if m & top != 0 {
                continue;
            }
            let n = m ^ x;
            let (am, an) = (self.amps[m], self.amps[n]);
            self.amps[m] = am * c + mis * phase(n) * an;
            self.amps[n] = an * c + mis * phase(m) * am;
        }
    }

    /// Applies a 2×2 unitary `[[u00, u01], [u10, u11]]` to qubit `q`.
    pub fn apply_single_qubit(&mut self, q: usize, u: [[Complex64; 2]; 2]) {
        let bit = 1usize << q;
        for m in 0..self.amps.len() {
            if m & bit != 0 {
                continue;
            }
            let (a0, a1) = (self.amps[m], self.amps[m | bit]);
            self.amps[m] = u[0][0] * a0 + u[0][1] * a1;
            self.amps[m | bit] = u[1][0] * a0 + u[1][1] * a1;
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1usize << control, 1usize << target);
        for m in 0..self.amps.len() {
            if m & cb != 0 && m & tb == 0 {
                self.amps.swap(m, m | tb);
            }
        }
    }

    /// `⟨ψ|H|ψ⟩`
    pub fn expectation(&self, h: &PauliHamiltonian) -> Result<f64> {
        self.check_same_size(h)?;
        let mut hv = vec![ZERO; self.amps.len()];
        h.apply(&self.amps, &mut hv);
        Ok(self
            .amps
            .iter()
            .zip(&hv)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .re)
    }

    fn check_same_size(&self, h: &PauliHamiltonian) -> Result<()> {
        if h.n_qubits() != self.n_qubits {
            return Err(CvqeError::DimensionMismatch(format!(
                "operator on {} qubits, state on {}",
                h.n_qubits(),
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Multinomial draw of `shots` outcomes from `|amplitude|²`, generated by
    /// sequential conditional binomials over ascending basis index with a
    /// ChaCha8 stream seeded from `seed`.
    pub fn sample(&self, shots: u64, seed: u64) -> Counts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_multinomial(&self.probabilities(), shots, &mut rng)
            .into_iter()
            .map(|(i, k)| (BasisState(i as u64), k))
            .collect()
    }

    /// Little-endian `(re, im)` f64 pairs, index = basis mask.
    pub fn write_amplitudes<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_amplitudes<R: Read>(n_qubits: usize, mut r: R) -> Result<Self> {
        check_qubits(n_qubits, MAX_QUBITS)?;
        let mut amps = Vec::with_capacity(1 << n_qubits);
        let mut buf = [0u8; 8];
        for _ in 0..1usize << n_qubits {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            amps.push(Complex64::new(re, im));
        }
        Ok(Self { n_qubits, amps })
    }
}

/// Independent seed for sub-stream `index` of `seed` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Multinomial sample over categories with weights `probs` (need not be
/// normalized). Returns `(category, count)` for nonzero counts, ascending.
pub fn sample_multinomial(probs: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<(usize, u64)> {
    let total: f64 = probs.iter().sum();
    let last = probs.iter().rposition(|&p| p > 0.0);
    let mut out = Vec::new();
    let (Some(last), true) = (last, total > 0.0) else {
        return out;
    };
    let mut remaining = shots;
    let mut mass = total;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let k = if i == last {
            remaining
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        if k > 0 {
            out.push((i, k));
        }
        remaining -= k;
        mass -= p;
    }
    out
}

/// Number of Trotter steps and step duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSchedule {
    pub n_steps: usize,
    pub dt: f64,
}

impl EvolutionSchedule {
    pub fn new(n_steps: usize, dt: f64) -> Result<Self> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(CvqeError::Config(format!("time step must be finite and non-negative, got {dt}")));
        }
        Ok(Self { n_steps, dt })
    }

    pub fn total_time(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// Interpolation fraction `i / N` used in step `i` (1-based).
    pub fn fraction(&self, step: usize) -> f64 {
        step as f64 / self.n_steps as f64
    }
}

/// `(1 − s)·H0 + s·H` over the union of both operators' terms.
#[derive(Debug, Clone)]
pub struct InterpolatedHamiltonian {
    n_qubits: usize,
    /// `(operator, coefficient in H0, coefficient in H)` in canonical order.
    terms: Vec<(Pauli, f64, f64)>,
}

impl InterpolatedHamiltonian {
    pub fn new(h0: &PauliHamiltonian, h: &PauliHamiltonian) -> Result<Self> {
        if h0.n_qubits() != h.n_qubits() {
            return Err(CvqeError::DimensionMismatch(format!(
                "initial Hamiltonian on {} qubits, target on {}",
                h0.n_qubits(),
                h.n_qubits()
            )));
        }
        h0.check_hermitian()?;
        h.check_hermitian()?;
        let mut map: BTreeMap<Pauli, (f64, f64)> = BTreeMap::new();
        for t in h0.terms() {
            map.entry(t.pauli).or_default().0 += t.coeff.re;
        }
        for t in h.terms() {
            map.entry(t.pauli).or_default().1 += t.coeff.re;
        }
        let mut terms: Vec<(Pauli, f64, f64)> = map.into_iter().map(|(p, (a, b))| (p, a, b)).collect();
        terms.sort_by_key(|t| t.0.order_key());
        Ok(Self {
            n_qubits: h.n_qubits(),
            terms,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Non-identity operators in the order they are applied within a step.
    pub fn term_order(&self) -> impl Iterator<Item = Pauli> + '_ {
        self.terms.iter().map(|t| t.0).filter(|p| !p.is_identity())
    }

    /// `(operator, coefficient)` at interpolation fraction `s`, identity excluded.
    pub fn coefficients_at(&self, s: f64) -> impl Iterator<Item = (Pauli, f64)> + '_ {
        self.terms
            .iter()
            .filter(|t| !t.0.is_identity())
            .map(move |&(p, a, b)| (p, (1.0 - s) * a + s * b))
    }

    /// Identity coefficient at fraction `s`; contributes only a global phase.
    pub fn identity_at(&self, s: f64) -> f64 {
        self.terms
            .iter()
            .find(|t| t.0.is_identity())
            .map(|&(_, a, b)| (1.0 - s) * a + s * b)
            .unwrap_or(0.0)
    }
}

/// First-order Trotterized evolution under `(1 − τ/T)·H0 + (τ/T)·H`, with
/// the interpolation evaluated at each step's right endpoint.
pub fn diabatic_evolve(
    initial: &StateVector,
    h0: &PauliHamiltonian,
    h: &PauliHamiltonian,
    schedule: EvolutionSchedule,
) -> Result<StateVector> {
    initial.check_same_size(h)?;
    let interp = InterpolatedHamiltonian::new(h0, h)?;
    let mut state = initial.clone();
    if schedule.n_steps == 0 || schedule.dt == 0.0 {
        return Ok(state);
    }
    for step in 1..=schedule.n_steps {
        let s = schedule.fraction(step);
        for (p, coeff) in interp.coefficients_at(s) {
            state.apply_pauli_exponential(p, coeff * schedule.dt);
        }
    }
    Ok(state)
}

// Dormand–Prince 5(4) tableau
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `i dψ/dτ = H(τ) ψ` for `τ ∈ [t0, t1]` with adaptive
/// Dormand–Prince steps, keeping the local error of each accepted step below
/// `tol`. `rhs(τ, ψ, out)` must write `H(τ) ψ` into `out`.
pub(crate) fn integrate_schrodinger<F>(psi: &mut [Complex64], t0: f64, t1: f64, tol: f64, mut rhs: F)
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = psi.len();
    let span = t1 - t0;
    if span <= 0.0 {
        return;
    }
    // f(τ, ψ) = −i H(τ) ψ
    let mut deriv = |t: f64, y: &[Complex64], out: &mut [Complex64]| {
        rhs(t, y, out);
        out.iter_mut().for_each(|o| *o = Complex64::new(o.im, -o.re));
    };
    let mut k: Vec<Vec<Complex64>> = vec![vec![ZERO; n]; 7];
    let mut stage = vec![ZERO; n];
    let mut t = t0;
    let mut h = (span / 100.0).min(1e-2);
    deriv(t, psi, &mut k[0]);
    while t1 - t > 1e-15 * span {
        if t + h > t1 {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = psi[i];
                for j in 0..s {
                    acc += k[j][i] * (h * DP_A[s][j]);
                }
                stage[i] = acc;
            }
            deriv(t + DP_C[s] * h, &stage, &mut k[s]);
        }
        // stage holds the 5th-order solution (FSAL row)
        let err = (0..n)
            .map(|i| {
                let mut e = ZERO;
                for j in 0..7 {
                    e += k[j][i] * (DP_B5[j] - DP_B4[j]);
                }
                (e * h).norm_sqr()
            })
            .sum::<f64>()
            .sqrt();
        if err <= tol || h < 1e-14 * span {
            psi.copy_from_slice(&stage);
            t += h;
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (tol / err).powf(0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
}

/// Adaptive-step integration of the time-ordered evolution under the
/// continuous linear schedule over total time `total_time`.
pub fn reference_evolution(
    initial: &StateVector,
    h0: &PauliHamiltonian,
    h: &PauliHamiltonian,
    total_time: f64,
    tol: f64,
) -> Result<StateVector> {
    check_qubits(initial.n_qubits, REFERENCE_MAX_QUBITS)?;
    initial.check_same_size(h)?;
    initial.check_same_size(h0)?;
    let mut state = initial.clone();
    if total_time <= 0.0 {
        return Ok(state);
    }
    let a: SparseHermitian = h0.to_sparse();
    let b: SparseHermitian = h.to_sparse();
    let n = state.amps.len();
    let mut tmp = vec![ZERO; n];
    integrate_schrodinger(&mut state.amps, 0.0, total_time, tol, |tau, y, out| {
        let s = tau / total_time;
        a.matvec(y, out);
        b.matvec(y, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o = *o * (1.0 - s) + t * s;
        }
    });
    Ok(state)
}
