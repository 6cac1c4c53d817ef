use std::f64::consts::PI;

use super::AffineMesh;
use crate::geometry::SmoothDomain;
use crate::{Error, Point2, Result};

/// Number of vertex rings used for `n_boundary_edges` boundary edges.
///
/// The ratio keeps radial and tangential spacing close on the unit disk and
/// doubles exactly along the `20 * 2^(n-1)` family.
pub fn ring_count(n_boundary_edges: usize) -> usize {
    ((0.15 * n_boundary_edges as f64).round() as usize).max(1)
}

/// Quasi-uniform triangulation of a star-shaped domain.
///
/// Concentric rings of the unit disk at radii `i / R` carry
/// `round(n_b i / R)` vertices each; consecutive rings are stitched by
/// merging their angular orders, the centre is fanned, and every vertex is
/// mapped radially by `rho -> rho kappa(theta)`. The outer ring consists of
/// `gamma(2 pi j / n_b)`.
pub fn generate_star_mesh(dom: &SmoothDomain, n_boundary_edges: usize) -> Result<AffineMesh> {
    let nb = n_boundary_edges;
    if nb < 8 || !nb.is_multiple_of(2) {
        return Err(Error::BadParameter(format!(
            "number of boundary edges must be even and >= 8, got {nb}"
        )));
    }
    let rings = ring_count(nb);
    let mut vertices = vec![Point2::zeros()];
    let mut flags = vec![false];
    // (first vertex index, count, angular offset in units of the ring spacing)
    let mut layout: Vec<(usize, usize, f64)> = vec![(0, 1, 0.0)];
    for i in 1..=rings {
        let count = if i == rings {
            nb
        } else {
            ((nb * i) as f64 / rings as f64).round().max(3.0) as usize
        };
        let offset = if (rings - i) % 2 == 1 { 0.5 } else { 0.0 };
        let rho = i as f64 / rings as f64;
        layout.push((vertices.len(), count, offset));
        for j in 0..count {
            let theta = 2.0 * PI * (j as f64 + offset) / count as f64;
            if i == rings {
                vertices.push(dom.boundary_point(theta));
                flags.push(true);
            } else {
                vertices.push(rho * dom.boundary_point(theta));
                flags.push(false);
            }
        }
    }

    let mut triangles = Vec::new();
    let (first, count, _) = layout[1];
    for j in 0..count {
        triangles.push([0, first + j, first + (j + 1) % count]);
    }
    for i in 2..=rings {
        stitch(layout[i - 1], layout[i], &mut triangles);
    }
    AffineMesh::new(vertices, triangles, flags)
}

/// Triangulate the annulus between two rings by walking both angular orders.
fn stitch(inner: (usize, usize, f64), outer: (usize, usize, f64), out: &mut Vec<[usize; 3]>) {
    let (fi, ni, si) = inner;
    let (fo, no, so) = outer;
    let a = |p: usize| 2.0 * PI * (p as f64 + si) / ni as f64;
    let b_raw = |q: usize| 2.0 * PI * (q as f64 + so) / no as f64;
    // outer start: last outer vertex with angle <= a(0)
    let q0 = (0..no).rev().find(|&q| b_raw(q) <= a(0) + 1e-12).unwrap_or(0);
    let b = |q: usize| b_raw(q0) + 2.0 * PI * (q as f64) / no as f64;
    let (mut p, mut q) = (0usize, 0usize);
    let inner_ix = |p: usize| fi + p % ni;
    let outer_ix = |q: usize| fo + (q0 + q) % no;
    while p < ni || q < no {
        let advance_outer = if p == ni {
            true
        } else if q == no {
            false
        } else {
            b(q + 1) < a(p + 1)
        };
        if advance_outer {
            out.push([inner_ix(p), outer_ix(q), outer_ix(q + 1)]);
            q += 1;
        } else {
            out.push([inner_ix(p), outer_ix(q), inner_ix(p + 1)]);
            p += 1;
        }
    }
}
