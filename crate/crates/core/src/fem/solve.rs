//! Linear solvers for the SPD systems produced by assembly.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Sparse Cholesky with iterative refinement.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub rel_tol: f64,
    pub max_iterations: usize,
    pub kind: SolverKind,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rel_tol: 1e-10,
            max_iterations: 20_000,
            kind: SolverKind::Direct,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-3) {
            return Err(Error::Config(format!(
                "solver rel_tol must lie in (0, 1e-3] (got {})",
                self.rel_tol
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("solver max_iterations must be > 0".into()));
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// ||Ax - b|| / ||b||, or ||Ax|| when b = 0.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = vec![0.0; a.n];
    a.mul_vec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri -= bi;
    }
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// 2-norm of |A||x|, the scale of the rounding error in evaluating Ax.
fn abs_product_norm(a: &CsrMatrix, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.n {
        let mut row = 0.0;
        for p in a.row_ptr[i]..a.row_ptr[i + 1] {
            row += (a.values[p] * x[a.col_idx[p]]).abs();
        }
        s += row * row;
    }
    s.sqrt()
}

/// Residual target: `rel_tol * ||b||`, but never below what double
/// precision can resolve for this x.
fn residual_target(a: &CsrMatrix, x: &[f64], nb: f64, rel_tol: f64) -> f64 {
    (rel_tol * nb).max(16.0 * f64::EPSILON * abs_product_norm(a, x))
}

/// Jacobi-preconditioned CG. Fails with the residual history when the cap is
/// reached, or with a definiteness error on a non-positive curvature.
pub fn pcg(a: &CsrMatrix, b: &[f64], rel_tol: f64, max_iterations: usize) -> Result<Vec<f64>> {
    let n = a.n;
    let nb = norm(b);
    if nb == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::Indefinite(format!("diagonal entry {i} is {}", diag[i])));
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    for it in 0..max_iterations {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Indefinite(format!(
                "non-positive curvature p'Ap = {pap:e} at iteration {it}"
            )));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm(&r) / nb;
        history.push(rel);
        if rel <= rel_tol {
            // The recurrence can drift from the true residual; confirm.
            if relative_residual(a, &x, b) * nb <= residual_target(a, &x, nb, rel_tol) {
                return Ok(x);
            }
            a.mul_vec(&x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
        residual: history.last().copied().unwrap_or(1.0),
        history,
    })
}

/// Sparse Cholesky factor of a symmetric matrix, kept for repeated solves.
pub struct Factorization {
    matrix: CsrMatrix,
    llt: Option<Llt<usize, f64>>,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.matrix.n)
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

impl Factorization {
    pub fn new(a: &CsrMatrix) -> Result<Factorization> {
        let n = a.n;
        // Symmetric CSR arrays read as CSC describe the same matrix.
        let symbolic = SymbolicSparseColMat::new_checked(n, n, a.row_ptr.clone(), None, a.col_idx.clone());
        let csc = SparseColMat::new(symbolic, a.values.clone());
        let llt = csc
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Indefinite(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Factorization {
            matrix: a.clone(),
            llt: Some(llt),
        })
    }

    /// Keeps the matrix only; [`Factorization::solve`] then runs CG.
    pub fn unfactored(a: CsrMatrix) -> Factorization {
        Factorization { matrix: a, llt: None }
    }

    pub fn n(&self) -> usize {
        self.matrix.n
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.llt.as_ref().expect("factorized").solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves and refines until the relative residual meets `rel_tol`.
    pub fn solve(&self, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
        let n = self.matrix.n;
        let nb = norm(b);
        if nb == 0.0 {
            return Ok(vec![0.0; n]);
        }
        if self.llt.is_none() {
            return pcg(&self.matrix, b, rel_tol, 20_000);
        }
        let mut x = self.apply(b);
        let mut history = Vec::new();
        let mut ax = vec![0.0; n];
        for _ in 0..4 {
            self.matrix.mul_vec(&x, &mut ax);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let rel = norm(&r) / nb;
            history.push(rel);
            if !rel.is_finite() {
                break;
            }
            if rel * nb <= residual_target(&self.matrix, &x, nb, rel_tol) {
                return Ok(x);
            }
            let dx = self.apply(&r);
            for (xi, d) in x.iter_mut().zip(dx) {
                *xi += d;
            }
        }
        Err(Error::NotConverged {
            iterations: history.len(),
            residual: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }
}

/// Solves `a x = b` under `opts`.
pub fn solve_matrix(a: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    if a.n != b.len() {
        return Err(Error::Assembly(format!(
            "matrix is {}x{} but rhs has {} entries",
            a.n,
            a.n,
            b.len()
        )));
    }
    match opts.kind {
        SolverKind::Direct => Factorization::new(a)?.solve(b, opts.rel_tol),
        SolverKind::Cg => pcg(a, b, opts.rel_tol, opts.max_iterations),
    }
}
