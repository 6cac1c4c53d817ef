use rayon::prelude::*;

use super::AffineMesh;
use crate::geometry::SmoothDomain;
use crate::lift::lambda_star;
use crate::refelem::{quadrature, LagrangeBasis, RefDim, Tabulation, TRIANGLE_EDGES};
use crate::{Error, Mat2, Point2, Result};

const LENGTH_QUADRATURE_DEGREE: usize = 30;

/// Mesh of order `r`: every element is the image of the reference triangle
/// under the `P^r` interpolant of its exact element map.
#[derive(Debug, Clone)]
pub struct CurvedMesh {
    base: AffineMesh,
    order: usize,
    geo_basis: LagrangeBasis,
    /// `geo_basis.len()` nodes per element, element-major, local lattice order.
    geo_nodes: Vec<Point2>,
}

impl CurvedMesh {
    /// Assemble a curved mesh from explicit geometry nodes.
    pub fn from_parts(base: AffineMesh, order: usize, geo_nodes: Vec<Point2>) -> Result<Self> {
        let geo_basis = LagrangeBasis::triangle(order)?;
        if geo_nodes.len() != geo_basis.len() * base.n_triangles() {
            return Err(Error::BadParameter("geometry node count does not match the mesh".into()));
        }
        Ok(CurvedMesh {
            base,
            order,
            geo_basis,
            geo_nodes,
        })
    }

    pub fn base(&self) -> &AffineMesh {
        &self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_elements(&self) -> usize {
        self.base.n_triangles()
    }

    pub fn h(&self) -> f64 {
        self.base.h
    }

    pub fn geo_basis(&self) -> &LagrangeBasis {
        &self.geo_basis
    }

    pub fn geo_nodes(&self, t: usize) -> &[Point2] {
        let n = self.geo_basis.len();
        &self.geo_nodes[t * n..(t + 1) * n]
    }

    pub fn flags(&self, t: usize) -> [bool; 3] {
        self.base.element_flags(t)
    }

    /// An element is internal when none of its vertices lies on the boundary.
    pub fn is_internal(&self, t: usize) -> bool {
        !self.flags(t).iter().any(|&f| f)
    }

    /// `F_T^(r)(xhat)`.
    pub fn map(&self, t: usize, xhat: &Point2) -> Point2 {
        let e = self.geo_basis.eval(xhat);
        self.geo_nodes(t)
            .iter()
            .zip(&e.values)
            .map(|(p, v)| p * *v)
            .sum()
    }

    /// `DF_T^(r)(xhat)`.
    pub fn jacobian(&self, t: usize, xhat: &Point2) -> Mat2 {
        let e = self.geo_basis.eval(xhat);
        jacobian_from(self.geo_nodes(t), &e.gradients)
    }

    pub fn map_and_jacobian(&self, t: usize, xhat: &Point2) -> (Point2, Mat2) {
        let e = self.geo_basis.eval(xhat);
        let nodes = self.geo_nodes(t);
        let x = nodes.iter().zip(&e.values).map(|(p, v)| p * *v).sum();
        (x, jacobian_from(nodes, &e.gradients))
    }

    /// Map and Jacobian at a tabulated point of the geometry basis.
    pub fn map_and_jacobian_tab(&self, t: usize, tab: &Tabulation, q: usize) -> (Point2, Mat2) {
        let nodes = self.geo_nodes(t);
        let x = nodes.iter().zip(tab.values(q)).map(|(p, v)| p * *v).sum();
        (x, jacobian_from(nodes, tab.gradients(q)))
    }

    /// `|Omega_h^(r)|` by quadrature of `det DF^(r)`.
    pub fn area(&self) -> Result<f64> {
        let rule = quadrature(RefDim::Triangle, 2 * self.order)?;
        let tab = self.geo_basis.tabulate(&rule.points);
        let mut total = 0.0;
        for t in 0..self.n_elements() {
            for (q, w) in rule.weights.iter().enumerate() {
                total += w * self.map_and_jacobian_tab(t, &tab, q).1.determinant();
            }
        }
        Ok(total)
    }

    /// `|Gamma_h^(r)|` by quadrature along the boundary edges. The speed
    /// `|DF dir|` is not polynomial, so a high fixed degree is used.
    pub fn boundary_length(&self) -> Result<f64> {
        let rule = quadrature(RefDim::Segment, LENGTH_QUADRATURE_DEGREE)?;
        let mut total = 0.0;
        for be in &self.base.boundary_edges {
            let (a, b) = TRIANGLE_EDGES[be.local_edge];
            let va = crate::refelem::reference_vertex(a);
            let dir = crate::refelem::reference_vertex(b) - va;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let jac = self.jacobian(be.element, &(va + dir * p.x));
                total += w * (jac * dir).norm();
            }
        }
        Ok(total)
    }

    /// Smallest `det DF^(r)` over the points of a rule, with its element.
    pub fn min_jacobian_determinant(&self, degree: usize) -> Result<(usize, f64)> {
        let rule = quadrature(RefDim::Triangle, degree)?;
        let tab = self.geo_basis.tabulate(&rule.points);
        let mut worst = (0, f64::INFINITY);
        for t in 0..self.n_elements() {
            for q in 0..rule.len() {
                let det = self.map_and_jacobian_tab(t, &tab, q).1.determinant();
                if det < worst.1 {
                    worst = (t, det);
                }
            }
        }
        Ok(worst)
    }
}

pub(crate) fn jacobian_from(nodes: &[Point2], gradients: &[Point2]) -> Mat2 {
    let mut j = Mat2::zeros();
    for (p, g) in nodes.iter().zip(gradients) {
        j += p * g.transpose();
    }
    j
}

/// Curve an affine mesh to order `r` by interpolating, at the `P^r` lattice
/// nodes of each element, the exact map
/// `x + (lambda*)^(r+2) (b(y) - y)` with `x = F_T(xhat)`, `y = F_T(yhat)`.
pub fn curve_mesh(mesh: &AffineMesh, dom: &SmoothDomain, r: usize) -> Result<CurvedMesh> {
    if !(1..=3).contains(&r) {
        return Err(Error::UnsupportedDegree {
            degree: r,
            min: 1,
            max: 3,
        });
    }
    let basis = LagrangeBasis::triangle(r)?;
    let lattice = basis.node_points();
    let per_element: Vec<Result<Vec<Point2>>> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| {
            let [v0, v1, v2] = mesh.vertex_coords(t);
            let affine = |p: &Point2| v0 + (v1 - v0) * p.x + (v2 - v0) * p.y;
            let flags = mesh.element_flags(t);
            lattice
                .iter()
                .map(|xhat| {
                    let x = affine(xhat);
                    let ls = lambda_star(flags, xhat);
                    match ls.y_hat {
                        None => Ok(x),
                        Some(yhat) => {
                            let y = affine(&yhat);
                            let b = dom.closest_point(&y)?.point;
                            Ok(x + ls.value.powi(r as i32 + 2) * (b - y))
                        }
                    }
                })
                .collect()
        })
        .collect();
    let mut geo_nodes = Vec::with_capacity(basis.len() * mesh.n_triangles());
    for nodes in per_element {
        geo_nodes.extend(nodes?);
    }
    let curved = CurvedMesh::from_parts(mesh.clone(), r, geo_nodes)?;
    let (element, det) = curved.min_jacobian_determinant(2 * r + 2)?;
    if !(det > 0.0) {
        return Err(Error::SingularGeometry { element, det });
    }
    Ok(curved)
}
