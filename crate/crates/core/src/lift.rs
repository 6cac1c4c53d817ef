//! Exact element maps `F^(e) = G_h^(r) o F_T^(r)` from the reference
//! triangle onto the elements of an exact tiling of the smooth domain.
//!
//! For an element with boundary flags `epsilon_i` and barycentric
//! coordinates `lambda_i`, let `lambda* = sum epsilon_i lambda_i` and
//! `yhat = sum epsilon_i lambda_i vhat_i / lambda*`. Then
//! `F^(e)(xhat) = x + (lambda*)^(r+2) (b(y) - y)` with `x = F_T^(r)(xhat)`,
//! `y = F_T^(r)(yhat)` and `b` the projection onto the boundary, and
//! `F^(e) = F_T^(r)` where `lambda* = 0`.
//!
//! Functions on the curved mesh are lifted through this map:
//! `u^l(F^(e)(xhat)) = uhat(xhat)`, so integrals over the exact domain are
//! reference-element quadratures and `F_T^(r)` is never inverted.

use crate::geometry::SmoothDomain;
use crate::mesh::CurvedMesh;
use crate::refelem::{barycentric, reference_vertex, BARYCENTRIC_GRADIENTS};
use crate::{Error, Mat2, Point2, Result};

/// `lambda*` and the associated boundary-face point `yhat`, which is `None`
/// on the zero set of `lambda*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaStar {
    pub value: f64,
    pub y_hat: Option<Point2>,
}

pub fn lambda_star(flags: [bool; 3], xhat: &Point2) -> LambdaStar {
    let lam = barycentric(xhat);
    let mut value = 0.0;
    let mut weighted = Point2::zeros();
    for i in 0..3 {
        if flags[i] {
            value += lam[i];
            weighted += lam[i] * reference_vertex(i);
        }
    }
    if value <= 0.0 {
        LambdaStar { value: 0.0, y_hat: None }
    } else {
        LambdaStar {
            value,
            y_hat: Some(weighted / value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactDifferential {
    /// Reference differential `D F^(e)(xhat)`.
    pub d: Mat2,
    /// `det D F^(e) / det D F^(r)`.
    pub jh: f64,
}

/// Everything the lifted quadratures need at one reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSample {
    /// `F^(r)(xhat)`.
    pub x: Point2,
    /// `D F^(r)(xhat)`.
    pub dx: Mat2,
    /// `F^(e)(xhat)`.
    pub point: Point2,
    /// `D F^(e)(xhat)`.
    pub d: Mat2,
}

impl ExactSample {
    pub fn jh(&self) -> f64 {
        self.d.determinant() / self.dx.determinant()
    }
}

/// Evaluator of the exact map of one element of a curved mesh.
#[derive(Debug, Clone, Copy)]
pub struct ExactMapEval<'a> {
    mesh: &'a CurvedMesh,
    dom: &'a SmoothDomain,
    element: usize,
    flags: [bool; 3],
    /// Step of the finite-difference differential.
    pub fd_step: f64,
}

impl<'a> ExactMapEval<'a> {
    pub fn new(mesh: &'a CurvedMesh, dom: &'a SmoothDomain, element: usize) -> Self {
        ExactMapEval {
            mesh,
            dom,
            element,
            flags: mesh.flags(element),
            fd_step: 1e-6,
        }
    }

    pub fn element(&self) -> usize {
        self.element
    }

    pub fn is_internal(&self) -> bool {
        !self.flags.iter().any(|&f| f)
    }

    pub fn exact_point(&self, xhat: &Point2) -> Result<Point2> {
        let x = self.mesh.map(self.element, xhat);
        let ls = lambda_star(self.flags, xhat);
        match ls.y_hat {
            None => Ok(x),
            Some(yhat) => {
                let y = self.mesh.map(self.element, &yhat);
                let b = self.dom.closest_point(&y)?.point;
                Ok(x + ls.value.powi(self.mesh.order() as i32 + 2) * (b - y))
            }
        }
    }

    /// Point and analytic differential, given `F^(r)` and `D F^(r)` at `xhat`.
    pub fn sample_with(&self, xhat: &Point2, x: Point2, dx: Mat2) -> Result<ExactSample> {
        let det = dx.determinant();
        if !(det > 0.0) {
            return Err(Error::SingularGeometry {
                element: self.element,
                det,
            });
        }
        let ls = lambda_star(self.flags, xhat);
        let Some(yhat) = ls.y_hat else {
            return Ok(ExactSample { x, dx, point: x, d: dx });
        };
        let r = self.mesh.order() as i32;
        let mut grad_ls = Point2::zeros();
        // sum_i epsilon_i vhat_i (x) grad lambda_i
        let mut weighted = Mat2::zeros();
        for i in 0..3 {
            if self.flags[i] {
                let g = Point2::new(BARYCENTRIC_GRADIENTS[i][0], BARYCENTRIC_GRADIENTS[i][1]);
                grad_ls += g;
                weighted += reference_vertex(i) * g.transpose();
            }
        }
        let dyhat = (weighted - yhat * grad_ls.transpose()) / ls.value;
        let (y, dfy) = self.mesh.map_and_jacobian(self.element, &yhat);
        let dy = dfy * dyhat;
        let (b, db) = self.dom.projection_with_differential(&y)?;
        let mu = ls.value.powi(r + 2);
        let dmu = (r + 2) as f64 * ls.value.powi(r + 1) * grad_ls;
        let point = x + mu * (b - y);
        let d = dx + (b - y) * dmu.transpose() + mu * (db - Mat2::identity()) * dy;
        Ok(ExactSample { x, dx, point, d })
    }

    pub fn sample(&self, xhat: &Point2) -> Result<ExactSample> {
        let (x, dx) = self.mesh.map_and_jacobian(self.element, xhat);
        self.sample_with(xhat, x, dx)
    }

    pub fn exact_differential(&self, xhat: &Point2) -> Result<ExactDifferential> {
        let s = self.sample(xhat)?;
        Ok(ExactDifferential { d: s.d, jh: s.jh() })
    }

    /// Finite-difference differential of [`Self::exact_point`], Richardson
    /// extrapolated; one-sided stencils are used next to the reference
    /// boundary so that every evaluation stays in the closed triangle.
    pub fn fd_differential(&self, xhat: &Point2) -> Result<Mat2> {
        let mut d = Mat2::zeros();
        for j in 0..2 {
            let mut e = Point2::zeros();
            e[j] = 1.0;
            let col = self.fd_column(xhat, &e)?;
            d.set_column(j, &col);
        }
        Ok(d)
    }

    fn fd_column(&self, xhat: &Point2, dir: &Point2) -> Result<Point2> {
        let h = self.fd_step;
        let inside = |p: &Point2| p.x >= 0.0 && p.y >= 0.0 && p.x + p.y <= 1.0;
        let f = |p: Point2| self.exact_point(&p);
        if inside(&(xhat + 2.0 * h * dir)) && inside(&(xhat - 2.0 * h * dir)) {
            let c = |s: f64| -> Result<Point2> { Ok((f(xhat + s * dir)? - f(xhat - s * dir)?) / (2.0 * s)) };
            let (c1, c2) = (c(h)?, c(2.0 * h)?);
            Ok((4.0 * c1 - c2) / 3.0)
        } else {
            let sign = if inside(&(xhat + 2.0 * h * dir)) { 1.0 } else { -1.0 };
            let s = sign * h;
            let f0 = f(*xhat)?;
            let (f1, f2) = (f(xhat + s * dir)?, f(xhat + 2.0 * s * dir)?);
            Ok((-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * s))
        }
    }
}
