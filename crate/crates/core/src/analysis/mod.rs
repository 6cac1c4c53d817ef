//! Errors on the exact domain, convergence orders and refinement studies.

mod study;

pub use study::{
    format_table, run_study, write_report, DomainSpec, EocRow, LevelResult, ReferenceSpec, StudyConfig,
    StudyReport,
};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::FeSpace;
use crate::geometry::SmoothDomain;
use crate::lift::ExactMapEval;
use crate::refelem::{quadrature, RefDim};
use crate::{Error, Point2, Result};

/// `Re z^n` or `Im z^n` with `z = x + i y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Harmonic {
    Re(u32),
    Im(u32),
}

impl Harmonic {
    pub fn degree(self) -> u32 {
        match self {
            Harmonic::Re(n) | Harmonic::Im(n) => n,
        }
    }

    /// Value and gradient at `p`.
    pub fn eval(self, p: &Point2) -> (f64, Point2) {
        let n = self.degree();
        let (zr, zi) = cpow(p.x, p.y, n);
        let (dr, di) = if n == 0 {
            (0.0, 0.0)
        } else {
            let (a, b) = cpow(p.x, p.y, n - 1);
            (n as f64 * a, n as f64 * b)
        };
        // d/dx z^n = n z^(n-1), d/dy z^n = i n z^(n-1)
        match self {
            Harmonic::Re(_) => (zr, Point2::new(dr, -di)),
            Harmonic::Im(_) => (zi, Point2::new(di, dr)),
        }
    }
}

fn cpow(x: f64, y: f64, n: u32) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..n {
        (re, im) = (re * x - im * y, re * y + im * x);
    }
    (re, im)
}

/// A finite-dimensional space of closed-form functions on the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticEigenspace {
    pub basis: Vec<Harmonic>,
}

impl AnalyticEigenspace {
    /// Harmonic polynomials of degree `n`: `span{1}` for `n = 0`, else
    /// `span{Re z^n, Im z^n}`.
    pub fn harmonic(n: u32) -> Self {
        let basis = if n == 0 {
            vec![Harmonic::Re(0)]
        } else {
            vec![Harmonic::Re(n), Harmonic::Im(n)]
        };
        AnalyticEigenspace { basis }
    }

    pub fn new(basis: Vec<Harmonic>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::BadParameter("an eigenspace needs at least one basis function".into()));
        }
        Ok(AnalyticEigenspace { basis })
    }

    /// Eigenspace of the unit-disk eigenvalue of rank `j` (1-based) for the
    /// boundary mass placement.
    pub fn disk_rank(j: usize) -> Self {
        Self::harmonic(disk_harmonic_degree(j))
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

/// Harmonic degree of the unit-disk eigenvalue of rank `j` (1-based): rank 1
/// is the constant, ranks `2n` and `2n + 1` have degree `n`.
pub fn disk_harmonic_degree(j: usize) -> u32 {
    assert!(j >= 1, "ranks start at 1");
    (j / 2) as u32
}

/// Unit-disk eigenvalues with the boundary mass (`n^2 + n + 1`), one entry
/// per rank with the multiplicity of that eigenvalue.
pub fn analytic_eigenvalues_disk(count: usize) -> Vec<(f64, usize)> {
    (1..=count)
        .map(|j| {
            let n = disk_harmonic_degree(j) as f64;
            (n * n + n + 1.0, if j == 1 { 1 } else { 2 })
        })
        .collect()
}

pub fn eigenvalue_error(lambda: f64, reference: f64) -> f64 {
    (lambda - reference).abs()
}

/// `log(e_n / e_{n+1}) / log(h_n / h_{n+1})` for consecutive levels.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 || errors.len() != hs.len() {
        return Err(Error::BadSequence(format!(
            "need at least two levels with matching lengths, got {} errors and {} sizes",
            errors.len(),
            hs.len()
        )));
    }
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::BadSequence(format!("errors must be positive, got {e}")));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0] && w[1] > 0.0)) {
        return Err(Error::BadSequence("mesh sizes must be positive and strictly decreasing".into()));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Both lifted errors with the coefficients of the best approximations.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedErrors {
    /// `inf_{u in E} ||U^l - u||_{L2(Omega)}`.
    pub l2: f64,
    /// `inf_{u in E} ||grad(U^l - u)||_{L2(Omega)}`.
    pub h10: f64,
    pub l2_coeffs: Vec<f64>,
    pub h1_coeffs: Vec<f64>,
}

/// Values sampled at one quadrature point of the exact tiling.
struct Sample {
    weight: f64,
    uh: f64,
    grad_uh: Point2,
    u: Vec<f64>,
    grad_u: Vec<Point2>,
}

/// Quadrature degree of the error integrals for a space of degree `k`.
pub fn error_quadrature_degree(k: usize) -> usize {
    2 * k + 6
}

fn samples(space: &FeSpace, dom: &SmoothDomain, x: &[f64], e: &AnalyticEigenspace, degree: usize) -> Result<Vec<Vec<Sample>>> {
    if x.len() != space.n_dofs() {
        return Err(Error::BadParameter(format!(
            "coefficient vector has length {}, expected {}",
            x.len(),
            space.n_dofs()
        )));
    }
    let mesh = space.mesh();
    let rule = quadrature(RefDim::Triangle, degree)?;
    let tab = space.basis().tabulate(&rule.points);
    let geo_tab = mesh.geo_basis().tabulate(&rule.points);
    (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let map = ExactMapEval::new(mesh, dom, t);
            let dofs = space.element_dofs(t);
            let mut out = Vec::with_capacity(rule.len());
            for (q, (xhat, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let (xr, dx) = mesh.map_and_jacobian_tab(t, &geo_tab, q);
                let s = map.sample_with(xhat, xr, dx)?;
                let det = s.d.determinant();
                if !(det > 0.0) {
                    return Err(Error::SingularGeometry { element: t, det });
                }
                let dit = s.d.try_inverse().expect("positive determinant").transpose();
                let mut uh = 0.0;
                let mut gref = Point2::zeros();
                for ((v, g), &d) in tab.values(q).iter().zip(tab.gradients(q)).zip(dofs) {
                    uh += x[d] * v;
                    gref += x[d] * g;
                }
                let (u, grad_u) = e.basis.iter().map(|f| f.eval(&s.point)).unzip();
                out.push(Sample {
                    weight: w * det,
                    uh,
                    grad_uh: dit * gref,
                    u,
                    grad_u,
                });
            }
            Ok(out)
        })
        .collect()
}

/// Solve the Gram system `G c = b`; `None` when `G` is numerically singular.
fn gram_solve(g: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    let diag_max = (0..g.nrows()).map(|i| g[(i, i)]).fold(0.0, f64::max);
    if !(diag_max > 0.0) {
        return None;
    }
    let eig = nalgebra::SymmetricEigen::new(g.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12 * diag_max) {
        return None;
    }
    g.cholesky().map(|c| c.solve(&b))
}

/// Both lifted errors of the finite element function `x`, at the error
/// quadrature degree of the space.
pub fn lifted_errors(space: &FeSpace, dom: &SmoothDomain, x: &[f64], e: &AnalyticEigenspace) -> Result<LiftedErrors> {
    lifted_errors_with(space, dom, x, e, error_quadrature_degree(space.degree()))
}

pub fn lifted_errors_with(
    space: &FeSpace,
    dom: &SmoothDomain,
    x: &[f64],
    e: &AnalyticEigenspace,
    degree: usize,
) -> Result<LiftedErrors> {
    let per_element = samples(space, dom, x, e, degree)?;
    let all = || per_element.iter().flatten();
    let d = e.dim();
    let mut g = DMatrix::zeros(d, d);
    let mut b = DVector::zeros(d);
    // gradient Gram only over the non-constant members
    let active: Vec<usize> = (0..d).filter(|&i| e.basis[i].degree() > 0).collect();
    let da = active.len();
    let mut gg = DMatrix::zeros(da, da);
    let mut bg = DVector::zeros(da);
    for s in all() {
        for i in 0..d {
            b[i] += s.weight * s.u[i] * s.uh;
            for j in 0..d {
                g[(i, j)] += s.weight * s.u[i] * s.u[j];
            }
        }
        for (a, &i) in active.iter().enumerate() {
            bg[a] += s.weight * s.grad_u[i].dot(&s.grad_uh);
            for (c, &j) in active.iter().enumerate() {
                gg[(a, c)] += s.weight * s.grad_u[i].dot(&s.grad_u[j]);
            }
        }
    }
    let c = gram_solve(g, b).ok_or(Error::SingularGram)?;
    let cg = if da == 0 {
        DVector::zeros(0)
    } else {
        gram_solve(gg, bg).ok_or(Error::SingularGram)?
    };
    let mut h1_coeffs = vec![0.0; d];
    for (a, &i) in active.iter().enumerate() {
        h1_coeffs[i] = cg[a];
    }
    // residuals evaluated directly rather than through ||uh||^2 - b'G^{-1}b
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for s in all() {
        let mut r = s.uh;
        let mut gr = s.grad_uh;
        for i in 0..d {
            r -= c[i] * s.u[i];
            gr -= h1_coeffs[i] * s.grad_u[i];
        }
        l2 += s.weight * r * r;
        h1 += s.weight * gr.norm_squared();
    }
    Ok(LiftedErrors {
        l2: l2.sqrt(),
        h10: h1.sqrt(),
        l2_coeffs: c.iter().copied().collect(),
        h1_coeffs,
    })
}

pub fn lifted_l2_error(space: &FeSpace, dom: &SmoothDomain, x: &[f64], e: &AnalyticEigenspace) -> Result<f64> {
    Ok(lifted_errors(space, dom, x, e)?.l2)
}

pub fn lifted_h1_error(space: &FeSpace, dom: &SmoothDomain, x: &[f64], e: &AnalyticEigenspace) -> Result<f64> {
    Ok(lifted_errors(space, dom, x, e)?.h10)
}

/// `||U^l - sum c_i u_i||` in `L2` and its gradient in `L2`, for given
/// coefficients, on the exact domain.
pub fn lifted_distance(
    space: &FeSpace,
    dom: &SmoothDomain,
    x: &[f64],
    e: &AnalyticEigenspace,
    coeffs: &[f64],
    degree: usize,
) -> Result<(f64, f64)> {
    let per_element = samples(space, dom, x, e, degree)?;
    let (mut l2, mut h1) = (0.0, 0.0);
    for s in per_element.iter().flatten() {
        let r = s.uh - coeffs.iter().zip(&s.u).map(|(c, u)| c * u).sum::<f64>();
        let gr = s.grad_uh - coeffs.iter().zip(&s.grad_u).map(|(c, g)| g * *c).sum::<Point2>();
        l2 += s.weight * r * r;
        h1 += s.weight * gr.norm_squared();
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{curve_mesh, generate_star_mesh};
    use std::sync::Arc;

    fn space(nb: usize, r: usize, k: usize) -> (SmoothDomain, FeSpace) {
        let dom = SmoothDomain::unit_disk();
        let m = generate_star_mesh(&dom, nb).unwrap();
        let cm = curve_mesh(&m, &dom, r).unwrap();
        (dom, FeSpace::new(Arc::new(cm), k).unwrap())
    }

    #[test]
    fn disk_spectrum() {
        let l = analytic_eigenvalues_disk(7);
        assert_eq!(l[0], (1.0, 1));
        assert_eq!(analytic_eigenvalues_disk(1), vec![(1.0, 1)]);
        assert_eq!(l[3], (7.0, 2));
        assert_eq!(l[5], (13.0, 2));
        assert_eq!(l[6], (13.0, 2));
        assert_eq!(disk_harmonic_degree(6), 3);
        assert_eq!(AnalyticEigenspace::disk_rank(1).dim(), 1);
    }

    #[test]
    fn harmonics_are_harmonic() {
        let h = 1e-3;
        for n in 0..6 {
            for f in [Harmonic::Re(n), Harmonic::Im(n)] {
                for p in [Point2::new(0.3, -0.2), Point2::new(-0.7, 0.5)] {
                    let v = |dx: f64, dy: f64| f.eval(&(p + Point2::new(dx, dy))).0;
                    let lap = (v(h, 0.0) + v(-h, 0.0) + v(0.0, h) + v(0.0, -h) - 4.0 * v(0.0, 0.0)) / (h * h);
                    assert!(lap.abs() < 1e-4, "{f:?} {lap}");
                    let g = f.eval(&p).1;
                    let fd = Point2::new((v(h, 0.0) - v(-h, 0.0)) / (2.0 * h), (v(0.0, h) - v(0.0, -h)) / (2.0 * h));
                    assert!((g - fd).norm() < 1e-5);
                }
            }
        }
        assert_eq!(Harmonic::Re(3).eval(&Point2::new(1.0, 1.0)).0, -2.0);
        assert_eq!(Harmonic::Im(3).eval(&Point2::new(1.0, 1.0)).0, 2.0);
    }

    #[test]
    fn eoc_examples() {
        assert!((eoc(&[0.4, 0.1], &[1.0, 0.5]).unwrap()[0] - 2.0).abs() < 1e-14);
        assert!((eoc(&[8e-3, 1e-3], &[1.0, 0.5]).unwrap()[0] - 3.0).abs() < 1e-12);
        assert_eq!(eoc(&[1e-3, 1e-3], &[1.0, 0.5]).unwrap()[0], 0.0);
        assert!(matches!(eoc(&[1.0], &[1.0]), Err(Error::BadSequence(_))));
        assert!(matches!(eoc(&[1.0, 0.0], &[1.0, 0.5]), Err(Error::BadSequence(_))));
        assert!(matches!(eoc(&[1.0, 0.5], &[0.5, 1.0]), Err(Error::BadSequence(_))));
        assert_eq!(eigenvalue_error(13.001, 13.0), 13.001 - 13.0);
    }

    #[test]
    fn constants_have_no_error_against_constants() {
        let (dom, s) = space(20, 2, 2);
        let one = vec![1.0; s.n_dofs()];
        let e = lifted_errors(&s, &dom, &one, &AnalyticEigenspace::harmonic(0)).unwrap();
        assert!(e.l2 < 1e-12 && e.h10 < 1e-12, "{e:?}");
        assert!((e.l2_coeffs[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_space_is_rejected() {
        assert!(AnalyticEigenspace::new(vec![]).is_err());
        let (dom, s) = space(20, 1, 1);
        // a dependent pair
        let e = AnalyticEigenspace::new(vec![Harmonic::Re(2), Harmonic::Re(2)]).unwrap();
        let x = vec![1.0; s.n_dofs()];
        assert!(matches!(lifted_errors(&s, &dom, &x, &e), Err(Error::SingularGram)));
    }

    #[test]
    fn interpolants_converge_at_the_expected_rate() {
        let e = AnalyticEigenspace::harmonic(3);
        for (r, k, l2_min, h1_min) in [(1, 1, 1.8, 0.9), (2, 2, 2.8, 1.8), (3, 3, 3.3, 2.3)] {
            let mut l2 = Vec::new();
            let mut h1 = Vec::new();
            for nb in [20, 40, 80] {
                let (dom, s) = space(nb, r, k);
                let x = s.interpolate(|p| Harmonic::Im(3).eval(p).0);
                let err = lifted_errors(&s, &dom, &x, &e).unwrap();
                l2.push(err.l2);
                h1.push(err.h10);
            }
            let hs = [1.0, 0.5, 0.25];
            let o2 = eoc(&l2, &hs).unwrap();
            let o1 = eoc(&h1, &hs).unwrap();
            assert!(o2[1] >= l2_min, "r={r} k={k} l2 {o2:?}");
            assert!(o1[1] >= h1_min, "r={r} k={k} h1 {o1:?}");
        }
    }

    #[test]
    fn gram_projection_matches_a_direct_least_squares() {
        let (dom, s) = space(20, 2, 2);
        let e = AnalyticEigenspace::harmonic(2);
        let x = s.interpolate(|p| 0.3 * Harmonic::Re(2).eval(p).0 - 1.1 * Harmonic::Im(2).eval(p).0 + 0.05 * p.x);
        let err = lifted_errors(&s, &dom, &x, &e).unwrap();
        let deg = error_quadrature_degree(2);
        let (l2, _) = lifted_distance(&s, &dom, &x, &e, &err.l2_coeffs, deg).unwrap();
        let (_, h1) = lifted_distance(&s, &dom, &x, &e, &err.h1_coeffs, deg).unwrap();
        assert!((l2 - err.l2).abs() <= 1e-12 * err.l2);
        assert!((h1 - err.h10).abs() <= 1e-12 * err.h10);
        // perturbing the coefficients can only increase the distance
        for dc in [[1e-4, 0.0], [0.0, -1e-4]] {
            let c: Vec<f64> = err.l2_coeffs.iter().zip(dc).map(|(a, b)| a + b).collect();
            assert!(lifted_distance(&s, &dom, &x, &e, &c, deg).unwrap().0 > err.l2);
        }
    }

    #[test]
    fn error_quadrature_is_saturated() {
        let (dom, s) = space(20, 3, 2);
        let e = AnalyticEigenspace::harmonic(3);
        let x = s.interpolate(|p| Harmonic::Re(3).eval(p).0);
        let lo = lifted_errors_with(&s, &dom, &x, &e, error_quadrature_degree(2)).unwrap();
        let hi = lifted_errors_with(&s, &dom, &x, &e, error_quadrature_degree(2) + 2).unwrap();
        assert!((lo.l2 - hi.l2).abs() < 1e-3 * lo.l2);
        assert!((lo.h10 - hi.h10).abs() < 1e-3 * lo.h10);
    }
}
