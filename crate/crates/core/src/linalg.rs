//! Compressed sparse row storage and the two linear solvers used by the
//! simulator: Jacobi-preconditioned conjugate gradients for the SPD pressure
//! system and symmetric Gauss–Seidel for the upwinded transport system.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("zero or negative diagonal at row {0}")]
    BadDiagonal(usize),
    #[error(
        "{solver} did not converge in {iterations} iterations (relative residual {residual:.3e})"
    )]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
}

/// Row-compressed sparse matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Square `n x n` matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        Self::from_triplets_rect(n, n, entries)
    }

    pub fn from_triplets_rect(
        n_rows: usize,
        n_cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        for &(row, col, _) in entries {
            if row >= n_rows || col >= n_cols {
                return Err(LinalgError::IndexOutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        sorted.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (row, col, val) in sorted {
            if last == Some((row, col)) {
                *values.last_mut().expect("duplicate follows an entry") += val;
                continue;
            }
            col_idx.push(col);
            values.push(val);
            row_ptr[row + 1] += 1;
            last = Some((row, col));
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values stored in row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        (0..self.n_rows).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1.0))
        })
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.n_cols {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }
}

/// Result of an iterative solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b − Ax‖ / ‖b‖`.
    pub residual: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_square_system(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<(), LinalgError> {
    if a.n_rows != a.n_cols {
        return Err(LinalgError::DimensionMismatch {
            expected: a.n_rows,
            got: a.n_cols,
        });
    }
    if b.len() != a.n_rows {
        return Err(LinalgError::DimensionMismatch {
            expected: a.n_rows,
            got: b.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(LinalgError::InvalidTolerance(tol));
    }
    Ok(())
}

/// Jacobi-preconditioned conjugate gradients for SPD `A`.
///
/// Converged when `‖b − Ax‖₂ / ‖b‖₂ ≤ tol`. A zero right-hand side returns the
/// zero vector without iterating.
pub fn solve_cg(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Solution, LinalgError> {
    solve_cg_with_guess(a, b, None, tol, max_iter)
}

pub fn solve_cg_with_guess(
    a: &SparseMatrix,
    b: &[f64],
    guess: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Solution, LinalgError> {
    check_square_system(a, b, tol)?;
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(LinalgError::BadDiagonal(i))
            }
        })
        .collect::<Result<_, _>>()?;

    let mut x = match guess {
        Some(g) if g.len() == n => g.to_vec(),
        Some(g) => {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: g.len(),
            })
        }
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.spmv_into(&x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut residual = norm2(&r) / b_norm;
    if residual <= tol {
        return Ok(Solution {
            x,
            iterations: 0,
            residual,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);

    for iter in 1..=max_iter {
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // not SPD along p; report the stall
            return Err(LinalgError::NotConverged {
                solver: "cg",
                iterations: iter,
                residual,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        residual = norm2(&r) / b_norm;
        if residual <= tol {
            return Ok(Solution {
                x,
                iterations: iter,
                residual,
            });
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
    Err(LinalgError::NotConverged {
        solver: "cg",
        iterations: max_iter,
        residual,
    })
}

/// Symmetric (forward then backward) Gauss–Seidel sweeps.
///
/// Intended for nonsingular M-matrices such as the implicit upwind transport
/// operator, for which the iteration is a convergent regular splitting.
/// `max_sweeps` counts forward/backward pairs.
pub fn solve_sgs(
    a: &SparseMatrix,
    b: &[f64],
    guess: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Solution, LinalgError> {
    check_square_system(a, b, tol)?;
    let n = b.len();
    if guess.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: guess.len(),
        });
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(LinalgError::BadDiagonal(i));
    }
    let b_norm = norm2(b).max(f64::MIN_POSITIVE);
    let mut x = guess.to_vec();
    let mut r = vec![0.0; n];

    let relax_row = |x: &mut [f64], i: usize| {
        let (cols, vals) = a.row(i);
        let mut off = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                off += v * x[j];
            }
        }
        x[i] = (b[i] - off) / diag[i];
    };

    let mut residual = f64::INFINITY;
    for sweep in 0..=max_sweeps {
        a.spmv_into(&x, &mut r);
        residual = r
            .iter()
            .zip(b)
            .map(|(ax, bi)| (bi - ax).powi(2))
            .sum::<f64>()
            .sqrt()
            / b_norm;
        if residual <= tol {
            return Ok(Solution {
                x,
                iterations: sweep,
                residual,
            });
        }
        if sweep == max_sweeps {
            break;
        }
        for i in 0..n {
            relax_row(&mut x, i);
        }
        for i in (0..n).rev() {
            relax_row(&mut x, i);
        }
    }
    Err(LinalgError::NotConverged {
        solver: "sgs",
        iterations: max_sweeps,
        residual,
    })
}
