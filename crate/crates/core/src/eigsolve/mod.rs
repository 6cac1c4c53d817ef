//! Smallest eigenpairs of `A x = Lambda M x` by shift-invert Lanczos.
//!
//! The iteration runs on `OP = (A - sigma M)^{-1} M`, self-adjoint in the
//! `M` inner product, whose largest eigenvalues `nu` give
//! `Lambda = sigma + 1 / nu`. Vectors `x` with `M x = 0` lie in the kernel of
//! `OP` and never enter the Krylov space, so a singular `M` only removes the
//! infinite eigenvalues.

mod inner;

pub use inner::{solve_spd, InnerSolver};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::SparseMatrix;
use crate::{Error, Result};
use inner::Factored;

/// Eigenpairs sorted by increasing eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// `||A x - Lambda M x||_2 / ||x||_2`, recomputed from the returned pairs.
    pub residuals: Vec<f64>,
    /// Operator applications.
    pub iterations: usize,
    /// Restart cycles.
    pub restarts: usize,
}

impl EigenResult {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rescale every vector to unit norm in `norm`.
    pub fn normalize_with(&mut self, norm: &SparseMatrix) {
        for x in &mut self.vectors {
            let s = norm.bilinear(x, x).sqrt();
            if s > 0.0 {
                x.iter_mut().for_each(|v| *v /= s);
            }
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(*r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub n_eig: usize,
    pub shift: f64,
    /// Residual target for `||A x - Lambda M x|| / ||x||`.
    pub tol: f64,
    /// Maximal number of restart cycles.
    pub max_iter: usize,
    pub seed: u64,
    pub inner: InnerSolver,
    /// Krylov dimension; `4 n_eig + 20` when `None`.
    pub krylov_dim: Option<usize>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            n_eig: 12,
            shift: -1.0,
            tol: 1e-12,
            max_iter: 500,
            seed: 0,
            inner: InnerSolver::default(),
            krylov_dim: None,
        }
    }
}

impl EigenOptions {
    pub fn new(n_eig: usize) -> Self {
        EigenOptions {
            n_eig,
            ..Self::default()
        }
    }
}

/// `(A - sigma M)^{-1} M` with the `M`-inner product.
struct ShiftInvert<'a> {
    m: &'a SparseMatrix,
    k: Factored<'a>,
    applications: usize,
}

impl ShiftInvert<'_> {
    fn apply(&mut self, mx: &[f64]) -> Result<Vec<f64>> {
        self.applications += 1;
        self.k.solve(mx)
    }
}

/// `M`-orthonormal basis vectors together with their images under `M`.
#[derive(Default)]
struct Basis {
    v: Vec<Vec<f64>>,
    mv: Vec<Vec<f64>>,
}

impl Basis {
    fn len(&self) -> usize {
        self.v.len()
    }

    fn push(&mut self, v: Vec<f64>, mv: Vec<f64>) {
        self.v.push(v);
        self.mv.push(mv);
    }

    /// Two passes of classical Gram-Schmidt in the `M` inner product;
    /// returns the accumulated coefficients.
    fn orthogonalize(&self, w: &mut [f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.len()];
        for _ in 0..2 {
            let c: Vec<f64> = self.mv.iter().map(|mv| dot(mv, w)).collect();
            for (ci, vi) in c.iter().zip(&self.v) {
                axpy(-ci, vi, w);
            }
            for (hi, ci) in h.iter_mut().zip(&c) {
                *hi += ci;
            }
        }
        h
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn combine(vs: &[Vec<f64>], coeffs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0; vs[0].len()];
    for (c, v) in coeffs.zip(vs) {
        axpy(c, v, &mut out);
    }
    out
}

fn check_inputs(a: &SparseMatrix, m: &SparseMatrix, opts: &EigenOptions) -> Result<()> {
    if a.dim() != m.dim() {
        return Err(Error::BadParameter(format!(
            "A is {0}x{0} but M is {1}x{1}",
            a.dim(),
            m.dim()
        )));
    }
    if opts.n_eig == 0 {
        return Err(Error::BadParameter("n_eig must be at least 1".into()));
    }
    if !(opts.shift < 0.0) {
        return Err(Error::BadParameter(format!("shift must be negative, got {}", opts.shift)));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::BadParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    Ok(())
}

struct Ritz {
    theta: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

/// Thick-restart Lanczos for the `want` largest eigenvalues of `op`,
/// orthogonal (in `M`) to the `locked` vectors.
fn lanczos(
    op: &mut ShiftInvert,
    locked: &Basis,
    want: usize,
    ritz_tol: f64,
    opts: &EigenOptions,
    rng: &mut ChaCha8Rng,
    restarts: &mut usize,
) -> Result<Ritz> {
    let mdim = opts.krylov_dim.unwrap_or(4 * opts.n_eig + 20).max(want + 2);
    let mut basis = Basis::default();
    let mut t = DMatrix::<f64>::zeros(mdim, mdim);
    let mut exhausted = false;

    let Some((v0, mv0)) = random_start(op, locked, &basis, rng)? else {
        return Ok(Ritz {
            theta: Vec::new(),
            vectors: Vec::new(),
        });
    };
    basis.push(v0, mv0);
    let mut beta_last = 0.0;
    loop {
        // expand from the pending vector to the full Krylov dimension
        let mut j = basis.len() - 1;
        while j < mdim && !exhausted {
            let mut w = op.apply(&basis.mv[j])?;
            locked.orthogonalize(&mut w);
            let h = basis.orthogonalize(&mut w);
            for (i, hi) in h.iter().enumerate() {
                t[(i, j)] = *hi;
                t[(j, i)] = *hi;
            }
            let mw = op.m.mul_vec(&w);
            let beta = dot(&w, &mw).max(0.0).sqrt();
            let scale = h.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
            if beta <= 1e-13 * scale {
                // invariant subspace reached
                beta_last = 0.0;
                if basis.len() == mdim {
                    j += 1;
                    break;
                }
                match random_start(op, locked, &basis, rng)? {
                    Some((v, mv)) => basis.push(v, mv),
                    None => {
                        exhausted = true;
                        j += 1;
                        break;
                    }
                }
            } else {
                beta_last = beta;
                basis.push(w.iter().map(|x| x / beta).collect(), mw.iter().map(|x| x / beta).collect());
            }
            j += 1;
        }
        let p = j.min(mdim);
        let tp = t.view((0, 0), (p, p)).into_owned();
        let eig = SymmetricEigen::new(tp);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let take = want.min(p);
        // the coupling to the pending vector exists only when one was pushed
        let pending = basis.len() > p;
        let converged = order[..take]
            .iter()
            .filter(|&&i| {
                let res = if pending { (beta_last * eig.eigenvectors[(p - 1, i)]).abs() } else { 0.0 };
                res <= ritz_tol * eig.eigenvalues[i].abs()
            })
            .count();
        if converged == take || *restarts >= opts.max_iter || exhausted && !pending {
            if converged < take && !exhausted {
                return Err(Error::NotConverged {
                    iterations: op.applications,
                    converged,
                    requested: want,
                });
            }
            let theta = order[..take].iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = order[..take]
                .iter()
                .map(|&i| combine(&basis.v[..p], (0..p).map(|r| eig.eigenvectors[(r, i)])))
                .collect();
            return Ok(Ritz { theta, vectors });
        }
        *restarts += 1;
        // thick restart: keep the best Ritz vectors and the pending vector
        let keep = (want + (p - want) / 2).min(p - 1).max(take);
        let mut next = Basis::default();
        for &i in &order[..keep] {
            let coeffs = || (0..p).map(|r| eig.eigenvectors[(r, i)]);
            next.push(combine(&basis.v[..p], coeffs()), combine(&basis.mv[..p], coeffs()));
        }
        let (fv, fmv) = (basis.v.pop().unwrap(), basis.mv.pop().unwrap());
        next.push(fv, fmv);
        t.fill(0.0);
        for (r, &i) in order[..keep].iter().enumerate() {
            t[(r, r)] = eig.eigenvalues[i];
        }
        basis = next;
    }
}

/// A random vector of `range(OP)`, `M`-orthonormalized against both bases.
fn random_start(
    op: &mut ShiftInvert,
    locked: &Basis,
    basis: &Basis,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let n = op.m.dim();
    for _ in 0..3 {
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mr = op.m.mul_vec(&r);
        let mut v = op.apply(&mr)?;
        let mv0 = op.m.mul_vec(&v);
        let before = dot(&v, &mv0).max(0.0).sqrt();
        if before == 0.0 {
            return Ok(None);
        }
        locked.orthogonalize(&mut v);
        basis.orthogonalize(&mut v);
        let mv = op.m.mul_vec(&v);
        let norm = dot(&v, &mv).max(0.0).sqrt();
        if norm > 1e-8 * before {
            return Ok(Some((v.iter().map(|x| x / norm).collect(), mv.iter().map(|x| x / norm).collect())));
        }
    }
    Ok(None)
}

fn residual(a: &SparseMatrix, m: &SparseMatrix, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let mx = m.mul_vec(x);
    let r: f64 = ax.iter().zip(&mx).map(|(p, q)| (p - lambda * q).powi(2)).sum::<f64>().sqrt();
    r / dot(x, x).sqrt()
}

/// The `n_eig` smallest finite eigenpairs of the pencil `(A, M)`.
///
/// Vectors are `M`-orthonormal. After the Ritz values converge, a deflated
/// Lanczos run against the accepted vectors checks that no eigenvalue in the
/// accepted range was missed (a single-vector Krylov space can see only one
/// copy of an exactly repeated eigenvalue).
pub fn solve_generalized(a: &SparseMatrix, m: &SparseMatrix, opts: &EigenOptions) -> Result<EigenResult> {
    check_inputs(a, m, opts)?;
    let k = a.add_scaled(m, -opts.shift);
    let mut op = ShiftInvert {
        m,
        k: Factored::new(&k, opts.inner)?,
        applications: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut restarts = 0;
    let mut ritz_tol = opts.tol;
    let mut attempts = 0;
    loop {
        let mut locked = Basis::default();
        let mut theta: Vec<f64> = Vec::new();
        let first = lanczos(&mut op, &locked, opts.n_eig, ritz_tol, opts, &mut rng, &mut restarts)?;
        for (th, v) in first.theta.into_iter().zip(first.vectors) {
            lock(&mut locked, &mut theta, th, v, m);
        }
        // deflation check for missed copies of repeated eigenvalues
        for _ in 0..opts.n_eig {
            let extra = lanczos(&mut op, &locked, 1, ritz_tol, opts, &mut rng, &mut restarts)?;
            let (Some(&th), Some(v)) = (extra.theta.first(), extra.vectors.into_iter().next()) else {
                break;
            };
            let theta_min = theta.iter().copied().fold(f64::INFINITY, f64::min);
            if theta.len() >= opts.n_eig && th <= theta_min * (1.0 + 1e-12) {
                break;
            }
            lock(&mut locked, &mut theta, th, v, m);
        }
        if theta.len() < opts.n_eig {
            return Err(Error::NotConverged {
                iterations: op.applications,
                converged: theta.len(),
                requested: opts.n_eig,
            });
        }
        let mut pairs: Vec<(f64, Vec<f64>)> = theta
            .iter()
            .zip(locked.v)
            .map(|(th, v)| (opts.shift + 1.0 / th, v))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        pairs.truncate(opts.n_eig);
        let mut residuals: Vec<f64> = pairs.iter().map(|(l, x)| residual(a, m, *l, x)).collect();
        let mut worst = residuals.iter().fold(0.0f64, |w, r| w.max(*r));
        for _ in 0..REFINE_SWEEPS {
            if worst <= opts.tol {
                break;
            }
            let Some(refined) = rayleigh_ritz(a, m, &mut op, &pairs)? else {
                break;
            };
            let res: Vec<f64> = refined.iter().map(|(l, x)| residual(a, m, *l, x)).collect();
            let w = res.iter().fold(0.0f64, |w, r| w.max(*r));
            if w >= worst {
                break;
            }
            (pairs, residuals, worst) = (refined, res, w);
        }
        if worst <= opts.tol || attempts >= 3 || restarts >= opts.max_iter {
            if worst > opts.tol {
                let converged = residuals.iter().filter(|r| **r <= opts.tol).count();
                return Err(Error::NotConverged {
                    iterations: op.applications,
                    converged,
                    requested: opts.n_eig,
                });
            }
            let (values, vectors) = pairs.into_iter().unzip();
            return Ok(EigenResult {
                values,
                vectors,
                residuals,
                iterations: op.applications,
                restarts,
            });
        }
        attempts += 1;
        ritz_tol *= 0.01;
    }
}

const REFINE_SWEEPS: usize = 4;

type Pair = (f64, Vec<f64>);

/// One step of subspace iteration: Rayleigh-Ritz for the original pencil on
/// `span{OP x_i}`. `None` when the projected mass is not positive definite.
fn rayleigh_ritz(
    a: &SparseMatrix,
    m: &SparseMatrix,
    op: &mut ShiftInvert,
    pairs: &[Pair],
) -> Result<Option<Vec<Pair>>> {
    let n = pairs.len();
    let ys: Vec<Vec<f64>> = pairs
        .iter()
        .map(|(_, x)| op.apply(&m.mul_vec(x)))
        .collect::<Result<_>>()?;
    let mys: Vec<Vec<f64>> = ys.iter().map(|y| m.mul_vec(y)).collect();
    let ays: Vec<Vec<f64>> = ys.iter().map(|y| a.mul_vec(y)).collect();
    let g = DMatrix::from_fn(n, n, |i, j| 0.5 * (dot(&ys[i], &mys[j]) + dot(&ys[j], &mys[i])));
    let h = DMatrix::from_fn(n, n, |i, j| 0.5 * (dot(&ys[i], &ays[j]) + dot(&ys[j], &ays[i])));
    let Some(chol) = g.cholesky() else {
        return Ok(None);
    };
    let Some(linv) = chol.l().try_inverse() else {
        return Ok(None);
    };
    let c = &linv * h * linv.transpose();
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let coeffs = linv.transpose() * &eig.eigenvectors;
    let mut out: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|i| (eig.eigenvalues[i], combine(&ys, coeffs.column(i).iter().copied())))
        .collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(Some(out))
}

/// `M`-orthonormalize `v` against the locked vectors and accept it.
fn lock(locked: &mut Basis, theta: &mut Vec<f64>, th: f64, mut v: Vec<f64>, m: &SparseMatrix) {
    locked.orthogonalize(&mut v);
    let mv = m.mul_vec(&v);
    let s = dot(&v, &mv).sqrt();
    locked.push(v.iter().map(|x| x / s).collect(), mv.iter().map(|x| x / s).collect());
    theta.push(th);
}
