use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Side;

use crate::error::{Error, Result};
use crate::sparse::{dot, norm, CsrMatrix, SparseSystem};

/// Systems up to this size use the sparse Cholesky factorization.
pub const DIRECT_LIMIT: usize = 200_000;

/// Linear solver selection for [`solve_spd_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolver {
    /// Cholesky up to [`DIRECT_LIMIT`] unknowns, CG above.
    Auto,
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

/// Solves `A x = b` for symmetric positive definite `A`. Conjugate gradients
/// stop at `|Ax - b| <= tol |b|`; the Cholesky solution is refined towards
/// that residual and accepted once its normwise backward error is below `tol`.
pub fn solve_spd(system: &SparseSystem, tol: f64) -> Result<Vec<f64>> {
    solve_spd_with(system, tol, LinearSolver::Auto)
}

pub fn solve_spd_with(system: &SparseSystem, tol: f64, method: LinearSolver) -> Result<Vec<f64>> {
    let n = system.n();
    if system.matrix.n_rows() != n || system.matrix.n_cols() != n {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{} but the right-hand side has {n} entries",
            system.matrix.n_rows(),
            system.matrix.n_cols()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    let b_norm = norm(&system.rhs);
    if n == 0 || b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let use_cg = match method {
        LinearSolver::Auto => n > DIRECT_LIMIT,
        LinearSolver::Cholesky => false,
        LinearSolver::Cg => true,
    };
    if use_cg {
        return pcg(&system.matrix, &system.rhs, tol.min(1e-12), 20 * n + 100);
    }
    cholesky(&system.matrix, &system.rhs, tol)
}

fn cholesky(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = b.len();
    let mut triplets = Vec::with_capacity(a.nnz() / 2 + n);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (j, v) in cols.iter().zip(vals) {
            if *j <= i {
                triplets.push(Triplet {
                    row: i,
                    col: *j,
                    val: *v,
                });
            }
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::SolverFailure(format!("cannot build sparse matrix: {e:?}")))?;
    let llt = mat.sp_cholesky(Side::Lower).map_err(|e| {
        Error::SolverFailure(format!(
            "Cholesky factorization failed ({e:?}); matrix of size {n} is not positive definite"
        ))
    })?;
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let x = llt.solve(Col::<f64>::from_fn(n, |i| rhs[i]));
        (0..n).map(|i| x[i]).collect()
    };
    let b_norm = norm(b);
    let mut x = solve(b);
    let mut res = residual(a, &x, b);
    for _ in 0..3 {
        if norm(&res) <= tol * b_norm {
            break;
        }
        let dx = solve(&res);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        res = residual(a, &x, b);
    }
    let berr = backward_error(a, &x, &res, b);
    if !berr.is_finite() || berr > tol {
        return Err(Error::SolverFailure(format!(
            "Cholesky solve reached backward error {berr:e} > {tol:e} (n = {n})"
        )));
    }
    Ok(x)
}

/// Normwise backward error `|r|_inf / (|A|_inf |x|_inf + |b|_inf)`.
fn backward_error(a: &CsrMatrix, x: &[f64], res: &[f64], b: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let a_norm = (0..a.n_rows())
        .map(|i| a.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    inf(res) / (a_norm * inf(x) + inf(b))
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect()
}

/// Conjugate gradients with diagonal preconditioning.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iters: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::SolverFailure(format!(
            "non-positive diagonal entry {:e} at row {i}",
            diag[i]
        )));
    }
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iters {
        if norm(&r) <= tol * b_norm {
            return Ok(x);
        }
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure(format!(
                "CG found non-positive curvature {pap:e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if norm(&r) <= tol * b_norm {
        return Ok(x);
    }
    Err(Error::SolverFailure(format!(
        "CG did not reach relative residual {tol:e} in {max_iters} iterations (reached {:e})",
        norm(&r) / b_norm
    )))
}
