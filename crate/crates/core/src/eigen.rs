//! Lowest-eigenpair solvers for Hermitian matrices.
//!
//! Small problems go through a dense Hermitian eigendecomposition. Larger
//! sparse problems use explicitly restarted Lanczos with full
//! reorthogonalization, restarting from the current lowest Ritz vector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CvqeError, Result};

/// Matrices up to this dimension are diagonalized densely.
pub const DENSE_LIMIT: usize = 200;

const START_SEED: u64 = 0x5eed_1a2c_705e;

/// Compressed sparse row storage of a Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHermitian {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseHermitian {
    /// Builds the matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside dimension {dim}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            row_ptr[r + 1] += 1;
            cols.push(c);
            vals.push(v);
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.cols[k], self.vals[k]))
        })
    }

    pub fn row_nnz(&self, row: usize) -> usize {
        self.row_ptr[row + 1] - self.row_ptr[row]
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.cols[range.clone()].binary_search(&col) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for r in 0..self.dim {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    /// Maximum absolute row sum; an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Largest violation of `a_rc == conj(a_cr)`.
    pub fn hermiticity_defect(&self) -> f64 {
        self.entries()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<Complex64>,
    /// `‖A v − λ v‖₂` for the returned unit vector.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Relative tolerance on the residual, scaled by the norm bound.
    pub rel_tol: f64,
    pub max_iterations: usize,
    /// Krylov dimension per restart cycle.
    pub cycle_len: usize,
}

impl LanczosOptions {
    pub fn for_dim(dim: usize) -> Self {
        Self {
            rel_tol: 1e-10,
            max_iterations: 10 * dim.max(1),
            cycle_len: dim.clamp(1, 80),
        }
    }
}

/// Picks the dense path for small matrices and Lanczos otherwise.
pub fn lowest_eigenpair(a: &SparseHermitian) -> Result<EigenPair> {
    if a.dim() == 0 {
        return Err(CvqeError::EmptyBasis("eigenproblem of dimension 0".into()));
    }
    if a.dim() <= DENSE_LIMIT {
        Ok(lowest_dense_sparse(a))
    } else {
        lowest_lanczos(a, LanczosOptions::for_dim(a.dim()))
    }
}

fn lowest_dense_sparse(a: &SparseHermitian) -> EigenPair {
    let mut pair = lowest_dense(&a.to_dense());
    pair.residual = residual(a, pair.value, &pair.vector);
    pair
}

/// Lowest eigenpair of a dense Hermitian matrix.
pub fn lowest_dense(m: &DMatrix<Complex64>) -> EigenPair {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let (idx, value) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty matrix");
    let vector: Vec<Complex64> = eig.eigenvectors.column(idx).iter().copied().collect();
    let v = DVector::from_column_slice(&vector);
    let r = (m * &v - v.scale(value)).norm();
    EigenPair {
        value,
        vector,
        residual: r,
        iterations: n,
    }
}

/// All eigenvalues of a dense Hermitian matrix, ascending.
pub fn dense_spectrum(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

fn residual(a: &SparseHermitian, value: f64, v: &[Complex64]) -> f64 {
    let mut av = vec![Complex64::new(0.0, 0.0); a.dim()];
    a.matvec(v, &mut av);
    av.iter()
        .zip(v)
        .map(|(x, y)| (x - y * value).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted Lanczos with full reorthogonalization.
pub fn lowest_lanczos(a: &SparseHermitian, opts: LanczosOptions) -> Result<EigenPair> {
    let n = a.dim();
    if n == 0 {
        return Err(CvqeError::EmptyBasis("eigenproblem of dimension 0".into()));
    }
    let scale = a.norm_bound().max(f64::MIN_POSITIVE);
    let tol = opts.rel_tol * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut start: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let s = norm(&start);
    start.iter_mut().for_each(|x| *x /= s);

    let m = opts.cycle_len.min(n).max(1);
    let mut total = 0usize;
    let mut best: Option<EigenPair> = None;
    let mut w = vec![Complex64::new(0.0, 0.0); n];

    while total < opts.max_iterations {
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(m);
        let mut betas: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            a.matvec(&basis[j], &mut w);
            total += 1;
            let alpha = dot(&basis[j], &w).re;
            alphas.push(alpha);
            for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                *wi -= vi * alpha;
            }
            if j > 0 {
                let b = betas[j - 1];
                for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                    *wi -= vi * b;
                }
            }
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi -= vi * c;
                    }
                }
            }
            let beta = norm(&w);
            if j + 1 == m || beta <= 1e-13 * scale {
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        }

        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (idx, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let y = eig.eigenvectors.column(idx);
        let mut ritz = vec![Complex64::new(0.0, 0.0); n];
        for (i, v) in basis.iter().enumerate().take(k) {
            for (r, vi) in ritz.iter_mut().zip(v) {
                *r += vi * y[i];
            }
        }
        let rn = norm(&ritz);
        ritz.iter_mut().for_each(|x| *x /= rn);
        let res = residual(a, theta, &ritz);
        let pair = EigenPair {
            value: theta,
            vector: ritz.clone(),
            residual: res,
            iterations: total,
        };
        if res <= tol {
            return Ok(pair);
        }
        best = Some(pair);
        start = ritz;
    }
    let residual = best.map(|b| b.residual).unwrap_or(f64::INFINITY);
    Err(CvqeError::Solver {
        iterations: total,
        residual,
    })
}
