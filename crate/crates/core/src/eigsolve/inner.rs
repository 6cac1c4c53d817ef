//! Solvers for the shifted systems `(A - sigma M) x = b`.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::assembly::SparseMatrix;
use crate::{Error, Result};

/// Which factorization (or iteration) backs the shifted solves.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InnerSolver {
    /// Sparse Cholesky with a fill-reducing ordering.
    #[default]
    SparseCholesky,
    /// Jacobi-preconditioned conjugate gradients.
    Cg { tol: f64, max_iter: usize },
    /// Dense Cholesky; intended for small systems only.
    DenseCholesky,
}

impl InnerSolver {
    pub const DEFAULT_CG_TOL: f64 = 1e-14;

    pub fn cg() -> Self {
        InnerSolver::Cg {
            tol: Self::DEFAULT_CG_TOL,
            max_iter: 20_000,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "cholesky" | "sparse-cholesky" => Ok(InnerSolver::SparseCholesky),
            "cg" | "pcg" => Ok(Self::cg()),
            "dense" | "dense-cholesky" => Ok(InnerSolver::DenseCholesky),
            other => Err(Error::BadParameter(format!(
                "inner solver must be cholesky, cg or dense, got '{other}'"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InnerSolver::SparseCholesky => "cholesky",
            InnerSolver::Cg { .. } => "cg",
            InnerSolver::DenseCholesky => "dense",
        }
    }
}

/// A factored (or preconditioned) SPD operator ready for repeated solves.
pub(crate) enum Factored<'a> {
    Sparse(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Cg {
        k: &'a SparseMatrix,
        tol: f64,
        max_iter: usize,
    },
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
}

impl<'a> Factored<'a> {
    pub(crate) fn new(k: &'a SparseMatrix, solver: InnerSolver) -> Result<Self> {
        let n = k.dim();
        match solver {
            InnerSolver::SparseCholesky => {
                let mut trips = Vec::with_capacity(k.nnz());
                for i in 0..n {
                    trips.extend(k.row(i).map(|(j, v)| Triplet::new(i, j, v)));
                }
                let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
                    .map_err(|e| Error::InnerSolveFailure(format!("{e:?}")))?;
                let llt = csc
                    .sp_cholesky(Side::Lower)
                    .map_err(|e| Error::InnerSolveFailure(format!("Cholesky factorization failed: {e:?}")))?;
                Ok(Factored::Sparse(llt))
            }
            InnerSolver::Cg { tol, max_iter } => {
                if let Some(i) = k.diagonal().iter().position(|d| !(*d > 0.0)) {
                    return Err(Error::InnerSolveFailure(format!(
                        "non-positive diagonal entry at row {i}; Jacobi preconditioner undefined"
                    )));
                }
                Ok(Factored::Cg { k, tol, max_iter })
            }
            InnerSolver::DenseCholesky => {
                let mut d = nalgebra::DMatrix::zeros(n, n);
                for i in 0..n {
                    for (j, v) in k.row(i) {
                        d[(i, j)] = v;
                    }
                }
                nalgebra::Cholesky::new(d)
                    .map(Factored::Dense)
                    .ok_or_else(|| Error::InnerSolveFailure("matrix is not positive definite".into()))
            }
        }
    }

    pub(crate) fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Factored::Sparse(llt) => {
                let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
                llt.solve_in_place(rhs.as_mut());
                Ok((0..b.len()).map(|i| rhs[(i, 0)]).collect())
            }
            Factored::Cg { k, tol, max_iter } => solve_spd(k, b, *tol, *max_iter),
            Factored::Dense(ch) => {
                let rhs = nalgebra::DVector::from_column_slice(b);
                Ok(ch.solve(&rhs).as_slice().to_vec())
            }
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Jacobi-preconditioned conjugate gradients. Returns `x` with
/// `||K x - b|| <= tol ||b||`.
pub fn solve_spd(k: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = k.dim();
    if b.len() != n {
        return Err(Error::BadParameter(format!("right-hand side has length {}, expected {n}", b.len())));
    }
    let diag = k.diagonal();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(Error::InnerSolveFailure(format!(
            "non-positive diagonal entry at row {i}; Jacobi preconditioner undefined"
        )));
    }
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 0..max_iter {
        k.mul_vec_into(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::InnerSolveFailure(format!("matrix is not positive definite (p'Kp = {pq:e})")));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if dot(&r, &r).sqrt() <= tol * bnorm {
            // confirm against the true residual
            let kx = k.mul_vec(&x);
            let true_res = kx.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if true_res <= tol * bnorm {
                return Ok(x);
            }
            r = b.iter().zip(&kx).map(|(b, a)| b - a).collect();
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
        if it + 1 == max_iter {
            break;
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        converged: 0,
        requested: 1,
    })
}
