//! Compressed-sparse-row matrices and a Jacobi-preconditioned conjugate
//! gradient solver.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows per parallel work unit in matrix-vector products.
const ROW_CHUNK: usize = 2048;

/// Square CSR matrix. The sparsity pattern is shared between matrices
/// built from the same mesh so that linear combinations are cheap.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Arc<[usize]>,
    col_idx: Arc<[usize]>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a zero matrix with the given pattern. Column indices in each
    /// row must be sorted and unique.
    pub fn from_pattern(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Result<Self> {
        if row_ptr.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                found: row_ptr.len(),
            });
        }
        if row_ptr[n] != col_idx.len() {
            return Err(Error::DimensionMismatch {
                expected: row_ptr[n],
                found: col_idx.len(),
            });
        }
        for i in 0..n {
            let row = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&j| j >= n) {
                return Err(Error::InvalidParameter(format!(
                    "row {i}: column indices must be sorted, unique and < {n}"
                )));
            }
        }
        let nnz = col_idx.len();
        Ok(Self {
            n,
            row_ptr: row_ptr.into(),
            col_idx: col_idx.into(),
            values: vec![0.0; nnz],
        })
    }

    /// Builds a matrix from dense row-major data, keeping every entry.
    pub fn from_dense(n: usize, dense: &[f64]) -> Result<Self> {
        if dense.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: dense.len(),
            });
        }
        let row_ptr = (0..=n).map(|i| i * n).collect();
        let col_idx = (0..n).flat_map(|_| 0..n).collect();
        let mut m = Self::from_pattern(n, row_ptr, col_idx)?;
        m.values.copy_from_slice(dense);
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern(n, (0..=n).collect(), (0..n).collect())
            .expect("diagonal pattern is valid");
        m.values.fill(1.0);
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Position of entry `(i, j)` in the value array, if stored.
    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        let row = &self.col_idx[start..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n == other.n
            && (Arc::ptr_eq(&self.row_ptr, &other.row_ptr) || self.row_ptr == other.row_ptr)
            && (Arc::ptr_eq(&self.col_idx, &other.col_idx) || self.col_idx == other.col_idx)
    }

    /// A matrix with this pattern and all values zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            n: self.n,
            row_ptr: Arc::clone(&self.row_ptr),
            col_idx: Arc::clone(&self.col_idx),
            values: vec![0.0; self.values.len()],
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self += alpha * other`; both matrices must share a pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &CsrMatrix) -> Result<()> {
        if !self.same_pattern(other) {
            return Err(Error::InvalidParameter(
                "add_scaled requires matrices with the same sparsity pattern".into(),
            ));
        }
        self.values
            .iter_mut()
            .zip(&other.values)
            .for_each(|(a, b)| *a += alpha * b);
        Ok(())
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        let row_ptr = &self.row_ptr;
        let col_idx = &self.col_idx;
        let values = &self.values;
        y.par_chunks_mut(ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, ys)| {
                let base = chunk * ROW_CHUNK;
                for (k, yi) in ys.iter_mut().enumerate() {
                    let i = base + k;
                    let mut acc = 0.0;
                    for s in row_ptr[i]..row_ptr[i + 1] {
                        acc += values[s] * x[col_idx[s]];
                    }
                    *yi = acc;
                }
            });
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Whether `A[i][j] == A[j][i]` holds bitwise for every stored entry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).all(|s| {
                let j = self.col_idx[s];
                self.slot(j, i)
                    .is_some_and(|t| self.values[t] == self.values[s])
            })
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
                    .iter()
                    .sum()
            })
            .collect()
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual `||b - A x|| / ||b||`.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct CgSettings {
    pub tol: f64,
    /// Iteration cap; `None` means `10 * n`.
    pub max_iter: Option<usize>,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` by Jacobi-preconditioned conjugate gradients starting
/// from `x0`. `A` must be symmetric; it is expected to be positive definite,
/// and a breakdown caused by indefiniteness is reported as non-convergence.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    cg_solve_monitored(a, b, x0, tol, max_iter, |_, _, _| {})
}

/// [`cg_solve`] that hands every iterate `(iteration, x, relative residual)`
/// to `monitor`.
pub fn cg_solve_monitored(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    mut monitor: impl FnMut(usize, &[f64], f64),
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must lie in (0, 1), got {tol}"
        )));
    }

    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        ));
    }

    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = x0.to_vec();
    let mut r = a.matvec(&x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    if rel <= tol {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                residual: rel,
                converged: true,
            },
        ));
    }

    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() || pap <= 0.0 {
            return Err(Error::NotConverged {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        monitor(it, &x, rel);
        if rel <= tol {
            // guard against drift of the recursive residual
            let mut true_r = a.matvec(&x);
            true_r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            let true_rel = dot(&true_r, &true_r).sqrt() / b_norm;
            if true_rel <= tol {
                return Ok((
                    x,
                    SolveReport {
                        iterations: it,
                        residual: true_rel,
                        converged: true,
                    },
                ));
            }
            r = true_r;
            rel = true_rel;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    Err(Error::NotConverged {
        iterations: max_iter,
        residual: rel,
    })
}

/// [`cg_solve`] with default-or-given settings.
pub fn cg_solve_with(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    settings: CgSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    let max_iter = settings.max_iter.unwrap_or(10 * a.n().max(1));
    cg_solve(a, b, x0, settings.tol, max_iter)
}
