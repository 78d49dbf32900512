//! Operator-string weights of the single-step evolution `U(1,T)` and the
//! continuous-schedule evolution `U_A(T)`, expanded in `H0` and
//! `H1 = H − H0`, with numeric checks of the weight formula.
//!
//! Under the linear schedule `H(τ) = H0 + (τ/T)·H1`, so every `H1` in a string
//! costs one extra power of `τ`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{CvqeError, Result};
use crate::statevector::integrate_schrodinger;

/// Largest order `enumerate_order` accepts.
pub const MAX_ENUMERATE_ORDER: usize = 8;
/// Largest order `verify_weights_numeric` accepts.
pub const MAX_QUADRATURE_ORDER: usize = 5;

/// Operator string over `{H0, H1}`, written left to right as in the
/// product; the rightmost operator acts first. `true` marks `H1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OperatorPattern(pub Vec<bool>);

impl OperatorPattern {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn h1_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Pattern number `index` of length `len`, the leftmost operator in the
    /// most significant bit.
    pub fn from_index(index: usize, len: usize) -> Self {
        Self((0..len).map(|j| index >> (len - 1 - j) & 1 == 1).collect())
    }

    /// `τ` exponent of the string in `Î_n(τ)`.
    pub fn tau_power(&self) -> usize {
        self.len() + self.h1_count()
    }
}

impl fmt::Display for OperatorPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("I");
        }
        for &b in &self.0 {
            f.write_str(if b { "H1" } else { "H0" })?;
        }
        Ok(())
    }
}

impl FromStr for OperatorPattern {
    type Err = CvqeError;

    /// Accepts `"H0H1H0"`, `"010"` or `"I"` for the empty string.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "I" || s.is_empty() {
            return Ok(Self(Vec::new()));
        }
        let digits = s.replace("H", "");
        digits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(CvqeError::Config(format!("bad operator pattern {s:?}"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(Self)
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// `1/n!` for a string of length `n`.
pub fn diabatic_weight(p: &OperatorPattern) -> Ratio<u64> {
    Ratio::new(1, factorial(p.len()))
}

/// `1/(γ₁(γ₁+γ₂)(γ₁+γ₂+γ₃)…)` with `γ = 2` for `H1` and `1` for `H0`,
/// accumulated from the rightmost (first applied) operator.
pub fn adiabatic_weight(p: &OperatorPattern) -> Ratio<u64> {
    let mut partial = 0u64;
    let mut den = 1u64;
    for &b in p.0.iter().rev() {
        partial += if b { 2 } else { 1 };
        den *= partial;
    }
    Ratio::new(1, den)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightRow {
    pub pattern: OperatorPattern,
    pub diabatic: Ratio<u64>,
    pub adiabatic: Ratio<u64>,
    pub tau_power: usize,
}

/// All `2^order` strings of the given length in pattern-index order.
pub fn enumerate_order(order: usize) -> Result<Vec<WeightRow>> {
    if order > MAX_ENUMERATE_ORDER {
        return Err(CvqeError::Capacity {
            what: "weight enumeration order",
            requested: order as f64,
            limit: MAX_ENUMERATE_ORDER as f64,
        });
    }
    Ok((0..1usize << order)
        .map(|i| {
            let pattern = OperatorPattern::from_index(i, order);
            WeightRow {
                diabatic: diabatic_weight(&pattern),
                adiabatic: adiabatic_weight(&pattern),
                tau_power: pattern.tau_power(),
                pattern,
            }
        })
        .collect())
}

#[derive(Debug, Serialize)]
struct CsvRow {
    pattern: String,
    w_num: u64,
    w_den: u64,
    wbar_num: u64,
    wbar_den: u64,
    tau_power: usize,
}

pub fn write_weights_csv<W: Write>(rows: &[WeightRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            pattern: r.pattern.to_string(),
            w_num: *r.diabatic.numer(),
            w_den: *r.diabatic.denom(),
            wbar_num: *r.adiabatic.numer(),
            wbar_den: *r.adiabatic.denom(),
            tau_power: r.tau_power,
        })
        .map_err(|e| CvqeError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Coefficient function of pattern `p` at `τ`, by nested quadrature of
/// `f(τ) = ∫₀^τ g(τ₁) f_rest(τ₁) dτ₁` with `g = 1` for `H0` and `τ₁/T` for `H1`.
fn tracked(p: &[bool], tau: f64, t_total: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let Some((&first, rest)) = p.split_first() else {
        return 1.0;
    };
    let half = tau / 2.0;
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(&x, &w)| {
            let s = half * (x + 1.0);
            let g = if first { s / t_total } else { 1.0 };
            w * half * g * tracked(rest, s, t_total, rule)
        })
        .sum()
}

/// Computes every string's coefficient in `Î_order(T)` by direct nested
/// quadrature (each string tracked as its own scalar function) and returns the
/// largest deviation from `adiabatic_weight`.
pub fn verify_weights_numeric(order: usize, grid: usize) -> Result<f64> {
    if order > MAX_QUADRATURE_ORDER {
        return Err(CvqeError::Capacity {
            what: "quadrature order",
            requested: order as f64,
            limit: MAX_QUADRATURE_ORDER as f64,
        });
    }
    let rule = gauss_legendre(grid.max(1));
    let t_total = 1.3;
    let mut worst = 0.0f64;
    for row in enumerate_order(order)? {
        let c = tracked(&row.pattern.0, t_total, t_total, &rule) / t_total.powi(order as i32);
        let exact = *row.adiabatic.numer() as f64 / *row.adiabatic.denom() as f64;
        worst = worst.max((c - exact).abs());
    }
    Ok(worst)
}

/// Same check with non-commuting matrix stand-ins: `H0`, `H1` prepend their
/// letter to a word, so `⟨p|Î_n(T)|∅⟩` isolates the coefficient of string `p`.
pub fn verify_weights_matrix(order: usize, grid: usize) -> Result<f64> {
    if order > 3 {
        return Err(CvqeError::Capacity {
            what: "matrix stand-in order",
            requested: order as f64,
            limit: 3.0,
        });
    }
    // words of length ≤ order, indexed by (1 << len) − 1 + pattern index
    let word = |p: &[bool]| (1usize << p.len()) - 1 + p.iter().fold(0usize, |a, &b| a << 1 | b as usize);
    let dim = (1usize << (order + 1)) - 1;
    let mut h0 = DMatrix::<f64>::zeros(dim, dim);
    let mut h1 = DMatrix::<f64>::zeros(dim, dim);
    for len in 0..order {
        for i in 0..1usize << len {
            let p = OperatorPattern::from_index(i, len).0;
            for (letter, m) in [(false, &mut h0), (true, &mut h1)] {
                let mut q = vec![letter];
                q.extend_from_slice(&p);
                m[(word(&q), word(&p))] = 1.0;
            }
        }
    }
    let rule = gauss_legendre(grid.max(1));
    let t_total = 0.9;
    let mut v0 = DVector::<f64>::zeros(dim);
    v0[0] = 1.0;
    fn nested(n: usize, tau: f64, t: f64, h0: &DMatrix<f64>, h1: &DMatrix<f64>, v0: &DVector<f64>, rule: &(Vec<f64>, Vec<f64>)) -> DVector<f64> {
        if n == 0 {
            return v0.clone();
        }
        let half = tau / 2.0;
        let mut acc = DVector::zeros(v0.len());
        for (&x, &w) in rule.0.iter().zip(&rule.1) {
            let s = half * (x + 1.0);
            let inner = nested(n - 1, s, t, h0, h1, v0, rule);
            acc += (h0 * &inner + h1 * &inner * (s / t)) * (w * half);
        }
        acc
    }
    let v = nested(order, t_total, t_total, &h0, &h1, &v0, &rule);
    let mut worst = 0.0f64;
    for row in enumerate_order(order)? {
        let c = v[word(&row.pattern.0)] / t_total.powi(order as i32);
        let exact = *row.adiabatic.numer() as f64 / *row.adiabatic.denom() as f64;
        worst = worst.max((c - exact).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesGap {
    pub order: usize,
    /// `‖Σ_{n≤order} (−iT)^n Π_n − exp(−iHT)‖₂`
    pub diabatic: f64,
    /// `‖Σ_{n≤order} (−iT)^n Π̃_n − U_A(T)‖₂`
    pub adiabatic: f64,
}

fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// `exp(−iAT)` for Hermitian `A`.
fn expm_hermitian(a: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let eig = a.clone().symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

/// `U_A(T)`: time-ordered evolution under `H0 + (τ/T)·H1` by adaptive
/// integration of every column.
pub fn adiabatic_propagator(h0: &DMatrix<Complex64>, h1: &DMatrix<Complex64>, t_total: f64) -> DMatrix<Complex64> {
    let dim = h0.nrows();
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    if t_total == 0.0 {
        return u;
    }
    for c in 0..dim {
        let mut psi: Vec<Complex64> = u.column(c).iter().cloned().collect();
        integrate_schrodinger(&mut psi, 0.0, t_total, 1e-13, |tau, y, out| {
            let y = DVector::from_column_slice(y);
            let r = h0 * &y + h1 * &y * Complex64::new(tau / t_total, 0.0);
            out.copy_from_slice(r.as_slice());
        });
        u.column_mut(c).copy_from_slice(&psi);
    }
    u
}

/// Both truncated series through `order` against their exact propagators.
/// Dense, for at most 4 qubits.
pub fn compare_truncated_series(h0: &DMatrix<Complex64>, h1: &DMatrix<Complex64>, t_total: f64, order: usize) -> Result<SeriesGap> {
    let dim = h0.nrows();
    if dim != h0.ncols() || h1.shape() != h0.shape() {
        return Err(CvqeError::DimensionMismatch("H0 and H1 must be square and equal in size".into()));
    }
    if dim > 16 {
        return Err(CvqeError::Capacity {
            what: "dense series dimension",
            requested: dim as f64,
            limit: 16.0,
        });
    }
    if order > MAX_ENUMERATE_ORDER {
        return Err(CvqeError::Capacity {
            what: "series order",
            requested: order as f64,
            limit: MAX_ENUMERATE_ORDER as f64,
        });
    }
    let id = DMatrix::<Complex64>::identity(dim, dim);
    let mut diabatic = id.clone();
    let mut adiabatic = id.clone();
    for n in 1..=order {
        let scale = Complex64::new(0.0, -t_total).powu(n as u32);
        for row in enumerate_order(n)? {
            let product = row
                .pattern
                .0
                .iter()
                .fold(id.clone(), |acc, &b| acc * if b { h1 } else { h0 });
            let w = *row.diabatic.numer() as f64 / *row.diabatic.denom() as f64;
            let wb = *row.adiabatic.numer() as f64 / *row.adiabatic.denom() as f64;
            diabatic += &product * (scale * w);
            adiabatic += &product * (scale * wb);
        }
    }
    let exact_d = expm_hermitian(&(h0 + h1), t_total);
    let exact_a = adiabatic_propagator(h0, h1, t_total);
    Ok(SeriesGap {
        order,
        diabatic: spectral_norm(&(diabatic - exact_d)),
        adiabatic: spectral_norm(&(adiabatic - exact_a)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(s: &str) -> OperatorPattern {
        s.parse().unwrap()
    }

    fn r(n: u64, d: u64) -> Ratio<u64> {
        Ratio::new(n, d)
    }

    #[test]
    fn diabatic_weights() {
        assert_eq!(diabatic_weight(&pat("H0H1H0")), r(1, 6));
        assert_eq!(diabatic_weight(&pat("H1")), r(1, 1));
        assert_eq!(diabatic_weight(&pat("0110")), r(1, 24));
    }

    #[test]
    fn printed_adiabatic_weights() {
        assert_eq!(adiabatic_weight(&pat("H0H0H1")), r(1, 24));
        assert_eq!(adiabatic_weight(&pat("H0H1H0")), r(1, 12));
        assert_eq!(adiabatic_weight(&pat("H1H0H0")), r(1, 8));
        assert_eq!(adiabatic_weight(&pat("H0H1")), r(1, 6));
        assert_eq!(adiabatic_weight(&pat("H1H0")), r(1, 3));
        assert_eq!(adiabatic_weight(&pat("H0H0H0")), r(1, 6));
        assert_eq!(adiabatic_weight(&pat("H1H1H1")), r(1, 48));
    }

    #[test]
    fn all_h0_reduces_to_factorial() {
        for n in 0..8 {
            let p = OperatorPattern(vec![false; n]);
            assert_eq!(adiabatic_weight(&p), diabatic_weight(&p));
        }
    }

    #[test]
    fn enumeration_orders() {
        let zero = enumerate_order(0).unwrap();
        assert_eq!(zero.len(), 1);
        assert_eq!((zero[0].adiabatic, zero[0].tau_power), (r(1, 1), 0));
        let one = enumerate_order(1).unwrap();
        assert_eq!(one[0].pattern.to_string(), "H0");
        assert_eq!((one[0].adiabatic, one[0].tau_power), (r(1, 1), 1));
        assert_eq!((one[1].adiabatic, one[1].tau_power), (r(1, 2), 2));
        assert_eq!(enumerate_order(3).unwrap().len(), 8);
        assert!(matches!(enumerate_order(9), Err(CvqeError::Capacity { .. })));
    }

    #[test]
    fn pattern_text_round_trip() {
        for i in 0..16 {
            let p = OperatorPattern::from_index(i, 4);
            assert_eq!(p.to_string().parse::<OperatorPattern>().unwrap(), p);
        }
        assert!(pat("I").is_empty());
        assert!("H2".parse::<OperatorPattern>().is_err());
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        // degree 8 monomial: ∫ x^8 = 2/9
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_matches_weights() {
        assert!(verify_weights_numeric(1, 4).unwrap() < 1e-14);
        assert!(verify_weights_numeric(2, 8).unwrap() < 1e-10);
        assert!(verify_weights_numeric(3, 8).unwrap() < 1e-9);
        assert!(verify_weights_matrix(3, 8).unwrap() < 1e-10);
    }

    #[test]
    fn series_at_zero_time_is_identity() {
        let h0 = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]));
        let h1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| Complex64::new(v, 0.0)));
        let g = compare_truncated_series(&h0, &h1, 0.0, 3).unwrap();
        assert!(g.diabatic < 1e-14 && g.adiabatic < 1e-14);
    }

    #[test]
    fn series_gap_shrinks_with_order() {
        let h0 = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(0.3, 0.0), Complex64::new(-0.7, 0.0)]));
        let h1 = DMatrix::from_row_slice(2, 2, &[Complex64::new(0.2, 0.0), Complex64::new(0.5, -0.1), Complex64::new(0.5, 0.1), Complex64::new(-0.4, 0.0)]);
        let gaps: Vec<SeriesGap> = (2..=6).map(|o| compare_truncated_series(&h0, &h1, 0.5, o).unwrap()).collect();
        for w in gaps.windows(2) {
            assert!(w[1].diabatic < w[0].diabatic);
            assert!(w[1].adiabatic < w[0].adiabatic);
        }
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        write_weights_csv(&enumerate_order(2).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "pattern,w_num,w_den,wbar_num,wbar_den,tau_power\nH0H0,1,2,1,2,2\nH0H1,1,2,1,6,3\nH1H0,1,2,1,3,3\nH1H1,1,2,1,8,4\n"
        );
    }
}
