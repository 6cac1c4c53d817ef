//! Affine and curved triangulations.

mod curved;
mod generate;
mod msh;

pub use curved::{curve_mesh, CurvedMesh};
pub use generate::{generate_star_mesh, ring_count};
pub use msh::{read_msh, write_msh, parse_msh, format_msh};

use std::collections::HashMap;

use crate::geometry::SmoothDomain;
use crate::{Error, Point2, Result};

/// Edge of the domain boundary, given as a local edge of an element
/// (local edge `e` joins local vertices `TRIANGLE_EDGES[e]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundaryEdge {
    pub element: usize,
    pub local_edge: usize,
}

/// Straight-sided triangulation whose boundary vertices lie on the smooth
/// boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMesh {
    pub vertices: Vec<Point2>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// `true` for vertices on the smooth boundary.
    pub boundary_flags: Vec<bool>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Largest element diameter.
    pub h: f64,
}

impl AffineMesh {
    /// Build a mesh from raw connectivity. Boundary edges are the edges owned
    /// by a single triangle.
    pub fn new(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>, boundary_flags: Vec<bool>) -> Result<Self> {
        if boundary_flags.len() != vertices.len() {
            return Err(Error::BadParameter("one boundary flag per vertex is required".into()));
        }
        let mut owners: HashMap<(usize, usize), Vec<BoundaryEdge>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::BadParameter(format!("triangle {t} references a missing vertex")));
            }
            for (e, &(a, b)) in crate::refelem::TRIANGLE_EDGES.iter().enumerate() {
                let key = (tri[a].min(tri[b]), tri[a].max(tri[b]));
                owners.entry(key).or_default().push(BoundaryEdge {
                    element: t,
                    local_edge: e,
                });
            }
        }
        let mut boundary_edges = Vec::new();
        for (key, own) in &owners {
            match own.len() {
                1 => boundary_edges.push(own[0]),
                2 => {}
                n => {
                    return Err(Error::BadParameter(format!(
                        "edge ({}, {}) is shared by {n} triangles",
                        key.0, key.1
                    )))
                }
            }
        }
        boundary_edges.sort_by_key(|b| (b.element, b.local_edge));
        let h = triangles
            .iter()
            .map(|tri| diameter(&vertices, tri))
            .fold(0.0, f64::max);
        Ok(AffineMesh {
            vertices,
            triangles,
            boundary_flags,
            boundary_edges,
            h,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| {
                crate::refelem::TRIANGLE_EDGES
                    .iter()
                    .map(move |&(a, b)| (t[a].min(t[b]), t[a].max(t[b])))
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// Boundary flags `epsilon_i` of the vertices of element `t`.
    pub fn element_flags(&self, t: usize) -> [bool; 3] {
        self.triangles[t].map(|v| self.boundary_flags[v])
    }

    pub fn vertex_coords(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertex_coords(t);
        0.5 * ((b - a).x * (c - a).y - (b - a).y * (c - a).x)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn element_diameter(&self, t: usize) -> f64 {
        diameter(&self.vertices, &self.triangles[t])
    }

    /// `h_max / h_min` over the element diameters.
    pub fn quasi_uniformity(&self) -> f64 {
        let hmin = (0..self.n_triangles())
            .map(|t| self.element_diameter(t))
            .fold(f64::INFINITY, f64::min);
        self.h / hmin
    }

    /// Check the structural invariants against the domain: boundary vertices
    /// on the boundary, positive orientation, no element with three boundary
    /// vertices, boundary edges joining flagged vertices.
    pub fn validate(&self, dom: &SmoothDomain, tol: f64) -> Result<()> {
        for (i, v) in self.vertices.iter().enumerate() {
            if self.boundary_flags[i] {
                let d = dom.signed_distance(v)?;
                if d.abs() > tol {
                    return Err(Error::BadParameter(format!("boundary vertex {i} is off the boundary by {d:e}")));
                }
            }
        }
        for t in 0..self.n_triangles() {
            if self.signed_area(t) <= 0.0 {
                return Err(Error::BadParameter(format!("triangle {t} is not positively oriented")));
            }
            if self.element_flags(t).iter().all(|&f| f) {
                return Err(Error::BadParameter(format!("triangle {t} has three boundary vertices")));
            }
        }
        for be in &self.boundary_edges {
            let (a, b) = crate::refelem::TRIANGLE_EDGES[be.local_edge];
            let tri = self.triangles[be.element];
            if !(self.boundary_flags[tri[a]] && self.boundary_flags[tri[b]]) {
                return Err(Error::BadParameter(format!(
                    "boundary edge of triangle {} joins unflagged vertices",
                    be.element
                )));
            }
        }
        Ok(())
    }

    /// Recompute boundary flags from the distance to the boundary.
    pub fn flag_boundary_vertices(&mut self, dom: &SmoothDomain, tol: f64) -> Result<()> {
        for (i, v) in self.vertices.iter().enumerate() {
            if v.norm() < 0.5 * dom.kappa_min() {
                self.boundary_flags[i] = false;
                continue;
            }
            self.boundary_flags[i] = dom.signed_distance(v)?.abs() <= tol;
        }
        Ok(())
    }
}

fn diameter(vertices: &[Point2], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = tri.map(|v| vertices[v]);
    (a - b).norm().max((b - c).norm()).max((c - a).norm())
}
