//! Continuous `P^k` spaces on curved meshes and the sparse forms of the
//! Ventcel problem.

mod sparse;

pub use sparse::SparseMatrix;

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;

use crate::mesh::CurvedMesh;
use crate::refelem::{quadrature, reference_vertex, LagrangeBasis, RefDim, TRIANGLE_EDGES};
use crate::{Error, Point2, Result};

pub const MAX_FE_DEGREE: usize = 4;

/// Extra quadrature degree on curved elements, where `1/det` and the arc-length
/// speed make the integrands non-polynomial.
pub const CURVED_MARGIN: usize = 4;

/// Where the spectral parameter enters the discrete problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MassPlacement {
    /// `m(u, v) = int_Omega u v`.
    Volume,
    /// `m(u, v) = int_Gamma u v`.
    Boundary,
}

impl std::str::FromStr for MassPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "volume" => Ok(MassPlacement::Volume),
            "boundary" => Ok(MassPlacement::Boundary),
            other => Err(Error::BadParameter(format!(
                "mass placement must be 'volume' or 'boundary', got '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for MassPlacement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MassPlacement::Volume => "volume",
            MassPlacement::Boundary => "boundary",
        })
    }
}

/// Globally continuous Lagrange space of degree `k` on a curved mesh.
///
/// Global numbering: vertices, then `k - 1` nodes per edge (ordered from the
/// lower to the higher vertex index), then the element-interior nodes.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<CurvedMesh>,
    basis: LagrangeBasis,
    n_dofs: usize,
    n_edges: usize,
    element_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: Arc<CurvedMesh>, k: usize) -> Result<Self> {
        if !(1..=MAX_FE_DEGREE).contains(&k) {
            return Err(Error::UnsupportedDegree {
                degree: k,
                min: 1,
                max: MAX_FE_DEGREE,
            });
        }
        let basis = LagrangeBasis::triangle(k)?;
        let base = mesh.base();
        let nv = base.n_vertices();
        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &base.triangles {
            for &(a, b) in &TRIANGLE_EDGES {
                let key = (tri[a].min(tri[b]), tri[a].max(tri[b]));
                let next = edge_ids.len();
                edge_ids.entry(key).or_insert(next);
            }
        }
        let n_edges = edge_ids.len();
        let per_edge = k - 1;
        let per_cell = basis.interior_count();
        let n_local = basis.len();
        let mut element_dofs = Vec::with_capacity(n_local * base.n_triangles());
        for (t, tri) in base.triangles.iter().enumerate() {
            let start = element_dofs.len();
            element_dofs.resize(start + n_local, usize::MAX);
            let local = &mut element_dofs[start..];
            local[..3].copy_from_slice(tri);
            for (e, &(a, b)) in TRIANGLE_EDGES.iter().enumerate() {
                let (va, vb) = (tri[a], tri[b]);
                let id = edge_ids[&(va.min(vb), va.max(vb))];
                for s in 0..per_edge {
                    let oriented = if va < vb { s } else { per_edge - 1 - s };
                    local[3 + e * per_edge + s] = nv + id * per_edge + oriented;
                }
            }
            let cell0 = nv + n_edges * per_edge + t * per_cell;
            for s in 0..per_cell {
                local[3 + 3 * per_edge + s] = cell0 + s;
            }
        }
        let n_dofs = nv + n_edges * per_edge + base.n_triangles() * per_cell;
        let mut boundary_dofs: Vec<usize> = base
            .boundary_edges
            .iter()
            .flat_map(|be| {
                let local = &element_dofs[be.element * n_local..(be.element + 1) * n_local];
                basis.edge_nodes(be.local_edge).into_iter().map(move |i| local[i])
            })
            .collect();
        boundary_dofs.sort_unstable();
        boundary_dofs.dedup();
        Ok(FeSpace {
            mesh,
            basis,
            n_dofs,
            n_edges,
            element_dofs,
            boundary_dofs,
        })
    }

    pub fn mesh(&self) -> &CurvedMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<CurvedMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    /// Global DOFs of element `t` in local lattice order.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let n = self.basis.len();
        &self.element_dofs[t * n..(t + 1) * n]
    }

    /// DOFs whose nodes lie on the curved boundary, sorted.
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    /// Physical position `F_T^(r)` of every DOF node.
    pub fn dof_points(&self) -> Vec<Point2> {
        let mut out = vec![Point2::zeros(); self.n_dofs];
        let nodes = self.basis.node_points();
        for t in 0..self.mesh.n_elements() {
            for (i, &g) in self.element_dofs(t).iter().enumerate() {
                out[g] = self.mesh.map(t, &nodes[i]);
            }
        }
        out
    }

    /// Coefficients of the nodal interpolant of `f` (evaluated at the
    /// `F_T^(r)` images of the lattice nodes).
    pub fn interpolate(&self, f: impl Fn(&Point2) -> f64) -> Vec<f64> {
        self.dof_points().iter().map(f).collect()
    }
}

/// Quadrature degrees used by the assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    pub volume_degree: usize,
    pub boundary_degree: usize,
}

impl AssemblyOptions {
    /// `2k + 2(r - 1) + 2` on cells and `2k + 2r` on boundary edges, plus
    /// [`CURVED_MARGIN`] when `r > 1`.
    pub fn for_space(space: &FeSpace) -> Self {
        let k = space.degree();
        let r = space.mesh().order();
        let margin = if r > 1 { CURVED_MARGIN } else { 0 };
        AssemblyOptions {
            volume_degree: 2 * k + 2 * (r - 1) + 2 + margin,
            boundary_degree: 2 * k + 2 * r + margin,
        }
    }

    pub fn scaled(self, factor: usize) -> Self {
        AssemblyOptions {
            volume_degree: self.volume_degree * factor,
            boundary_degree: self.boundary_degree * factor,
        }
    }
}

/// The four elementary forms of the problem.
#[derive(Debug, Clone)]
pub struct Forms {
    /// `int_Omega_h grad u . grad v`.
    pub volume_stiffness: SparseMatrix,
    /// `int_Gamma_h grad_Gamma u . grad_Gamma v`.
    pub boundary_stiffness: SparseMatrix,
    /// `int_Omega_h u v`.
    pub volume_mass: SparseMatrix,
    /// `int_Gamma_h u v`.
    pub boundary_mass: SparseMatrix,
}

impl Forms {
    /// `a_h = volume stiffness + boundary stiffness + boundary mass`.
    pub fn a(&self) -> SparseMatrix {
        self.volume_stiffness
            .add_scaled(&self.boundary_stiffness, 1.0)
            .add_scaled(&self.boundary_mass, 1.0)
    }

    pub fn m(&self, placement: MassPlacement) -> SparseMatrix {
        match placement {
            MassPlacement::Volume => self.volume_mass.clone(),
            MassPlacement::Boundary => self.boundary_mass.clone(),
        }
    }
}

type Triplets = Vec<(usize, usize, f64)>;

fn push_local(out: &mut Triplets, dofs: &[usize], local: &[f64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            out.push((dofs[i], dofs[j], local[i * n + j]));
        }
    }
}

/// Assemble every form with the default quadrature degrees.
pub fn assemble_forms(space: &FeSpace) -> Result<Forms> {
    assemble_forms_with(space, AssemblyOptions::for_space(space))
}

pub fn assemble_forms_with(space: &FeSpace, opts: AssemblyOptions) -> Result<Forms> {
    let (volume_stiffness, volume_mass) = assemble_volume(space, opts.volume_degree)?;
    let (boundary_stiffness, boundary_mass) = assemble_boundary(space, opts.boundary_degree)?;
    Ok(Forms {
        volume_stiffness,
        boundary_stiffness,
        volume_mass,
        boundary_mass,
    })
}

pub fn assemble_a(space: &FeSpace) -> Result<SparseMatrix> {
    Ok(assemble_forms(space)?.a())
}

pub fn assemble_m(space: &FeSpace, placement: MassPlacement) -> Result<SparseMatrix> {
    let opts = AssemblyOptions::for_space(space);
    Ok(match placement {
        MassPlacement::Volume => assemble_volume(space, opts.volume_degree)?.1,
        MassPlacement::Boundary => assemble_boundary(space, opts.boundary_degree)?.1,
    })
}

fn assemble_volume(space: &FeSpace, degree: usize) -> Result<(SparseMatrix, SparseMatrix)> {
    let mesh = space.mesh();
    let rule = quadrature(RefDim::Triangle, degree)?;
    let tab = space.basis().tabulate(&rule.points);
    let geo_tab = mesh.geo_basis().tabulate(&rule.points);
    let n = space.basis().len();
    let locals: Vec<(Triplets, Triplets)> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|t| {
            let mut ke = vec![0.0; n * n];
            let mut me = vec![0.0; n * n];
            let mut grads = vec![Point2::zeros(); n];
            for (q, w) in rule.weights.iter().enumerate() {
                let (_, jac) = mesh.map_and_jacobian_tab(t, &geo_tab, q);
                let det = jac.determinant();
                if !(det > 0.0) {
                    return Err(Error::SingularGeometry { element: t, det });
                }
                let jit = jac.try_inverse().expect("positive determinant").transpose();
                for (g, gh) in grads.iter_mut().zip(tab.gradients(q)) {
                    *g = jit * gh;
                }
                let vals = tab.values(q);
                let wd = w * det;
                for i in 0..n {
                    for j in i..n {
                        ke[i * n + j] += wd * grads[i].dot(&grads[j]);
                        me[i * n + j] += wd * vals[i] * vals[j];
                    }
                }
            }
            symmetrize(&mut ke, n);
            symmetrize(&mut me, n);
            let dofs = space.element_dofs(t);
            let (mut kt, mut mt) = (Vec::with_capacity(n * n), Vec::with_capacity(n * n));
            push_local(&mut kt, dofs, &ke, n);
            push_local(&mut mt, dofs, &me, n);
            Ok((kt, mt))
        })
        .collect::<Result<_>>()?;
    Ok(merge(space.n_dofs(), locals))
}

fn assemble_boundary(space: &FeSpace, degree: usize) -> Result<(SparseMatrix, SparseMatrix)> {
    let mesh = space.mesh();
    let basis = space.basis();
    let rule = quadrature(RefDim::Segment, degree)?;
    let edges = &mesh.base().boundary_edges;
    let locals: Vec<(Triplets, Triplets)> = edges
        .par_iter()
        .map(|be| {
            let (a, b) = TRIANGLE_EDGES[be.local_edge];
            let va = reference_vertex(a);
            let dir = reference_vertex(b) - va;
            let on_edge = basis.edge_nodes(be.local_edge);
            let n = on_edge.len();
            let mut se = vec![0.0; n * n];
            let mut me = vec![0.0; n * n];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let xhat = va + dir * p.x;
                let (_, jac) = mesh.map_and_jacobian(be.element, &xhat);
                let speed = (jac * dir).norm();
                if !(speed > 0.0) {
                    return Err(Error::SingularGeometry {
                        element: be.element,
                        det: speed,
                    });
                }
                let e = basis.eval(&xhat);
                for i in 0..n {
                    let (vi, ti) = (e.values[on_edge[i]], e.gradients[on_edge[i]].dot(&dir));
                    for j in i..n {
                        let (vj, tj) = (e.values[on_edge[j]], e.gradients[on_edge[j]].dot(&dir));
                        se[i * n + j] += w * ti * tj / speed;
                        me[i * n + j] += w * vi * vj * speed;
                    }
                }
            }
            symmetrize(&mut se, n);
            symmetrize(&mut me, n);
            let all = space.element_dofs(be.element);
            let dofs: Vec<usize> = on_edge.iter().map(|&i| all[i]).collect();
            let (mut st, mut mt) = (Vec::with_capacity(n * n), Vec::with_capacity(n * n));
            push_local(&mut st, &dofs, &se, n);
            push_local(&mut mt, &dofs, &me, n);
            Ok((st, mt))
        })
        .collect::<Result<_>>()?;
    Ok(merge(space.n_dofs(), locals))
}

fn symmetrize(m: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..i {
            m[i * n + j] = m[j * n + i];
        }
    }
}

fn merge(n: usize, locals: Vec<(Triplets, Triplets)>) -> (SparseMatrix, SparseMatrix) {
    let (first, second): (Vec<Triplets>, Vec<Triplets>) = locals.into_iter().unzip();
    (
        SparseMatrix::from_triplets(n, first.concat()),
        SparseMatrix::from_triplets(n, second.concat()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SmoothDomain;
    use crate::mesh::{curve_mesh, generate_star_mesh, AffineMesh};

    fn disk_space(nb: usize, r: usize, k: usize) -> FeSpace {
        let dom = SmoothDomain::unit_disk();
        let m = generate_star_mesh(&dom, nb).unwrap();
        FeSpace::new(Arc::new(curve_mesh(&m, &dom, r).unwrap()), k).unwrap()
    }

    fn reference_triangle(flags: [bool; 3]) -> FeSpace {
        let verts = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let m = AffineMesh::new(verts, vec![[0, 1, 2]], flags.to_vec()).unwrap();
        let n = m.n_triangles();
        let nodes = (0..n)
            .flat_map(|t| {
                let c = m.vertex_coords(t);
                LagrangeBasis::triangle(1)
                    .unwrap()
                    .node_points()
                    .into_iter()
                    .map(move |p| c[0] + (c[1] - c[0]) * p.x + (c[2] - c[0]) * p.y)
            })
            .collect();
        FeSpace::new(Arc::new(CurvedMesh::from_parts(m, 1, nodes).unwrap()), 1).unwrap()
    }

    #[test]
    fn dof_counts_follow_the_lattice_formula() {
        for k in 1..=4 {
            let s = disk_space(20, 2, k);
            let base = s.mesh().base();
            let (v, e, t) = (base.n_vertices(), base.n_edges(), base.n_triangles());
            assert_eq!(s.n_dofs(), v + (k - 1) * e + (k - 1) * k.saturating_sub(2) / 2 * t);
            assert_eq!(s.boundary_dofs().len(), 20 * k);
            let mut seen = vec![false; s.n_dofs()];
            for el in 0..t {
                for &d in s.element_dofs(el) {
                    seen[d] = true;
                }
            }
            assert!(seen.iter().all(|&x| x));
        }
        assert_eq!(disk_space(20, 1, 1).boundary_dofs().len(), 20);
        let dom = SmoothDomain::unit_disk();
        let m = generate_star_mesh(&dom, 20).unwrap();
        let cm = Arc::new(curve_mesh(&m, &dom, 1).unwrap());
        assert!(matches!(FeSpace::new(cm.clone(), 5), Err(Error::UnsupportedDegree { .. })));
        assert!(matches!(FeSpace::new(cm, 0), Err(Error::UnsupportedDegree { .. })));
    }

    #[test]
    fn shared_edge_nodes_coincide() {
        let s = disk_space(20, 3, 4);
        let pts = s.dof_points();
        let nodes = s.basis().node_points();
        for t in 0..s.mesh().n_elements() {
            for (i, &g) in s.element_dofs(t).iter().enumerate() {
                assert!((s.mesh().map(t, &nodes[i]) - pts[g]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn constants_measure_the_curved_domain() {
        let dom = SmoothDomain::unit_disk();
        let m = generate_star_mesh(&dom, 20).unwrap();
        for r in 1..=3 {
            let cm = Arc::new(curve_mesh(&m, &dom, r).unwrap());
            let len = cm.boundary_length().unwrap();
            let area = cm.area().unwrap();
            for k in 1..=3 {
                let s = FeSpace::new(cm.clone(), k).unwrap();
                let f = assemble_forms(&s).unwrap();
                let one = vec![1.0; s.n_dofs()];
                let a11 = f.a().bilinear(&one, &one);
                assert!((a11 - len).abs() < 1e-12, "r={r} k={k} {a11} {len}");
                assert!((f.m(MassPlacement::Boundary).bilinear(&one, &one) - len).abs() < 1e-12);
                assert!((f.m(MassPlacement::Volume).bilinear(&one, &one) - area).abs() < 1e-12);
                assert!(f.volume_stiffness.mul_vec(&one).iter().all(|v| v.abs() < 1e-11));
                assert!(f.boundary_stiffness.mul_vec(&one).iter().all(|v| v.abs() < 1e-11));
            }
        }
    }

    #[test]
    fn unit_triangle_stiffness() {
        let s = reference_triangle([false; 3]);
        let f = assemble_forms(&s).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((f.volume_stiffness.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
            let row: f64 = (0..3).map(|j| f.volume_stiffness.get(i, j)).sum();
            assert!(row.abs() < 1e-15);
        }
        // a lone triangle owns three boundary edges
        assert_eq!(f.boundary_mass.nnz(), 9);
        assert!((f.volume_mass.get(0, 0) - 1.0 / 12.0).abs() < 1e-15);
        assert!((f.volume_mass.get(0, 1) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn galerkin_consistency_on_linears() {
        let s = reference_triangle([false; 3]);
        let f = assemble_forms(&s).unwrap();
        // u = 1 + 2x - y, v = 3 - x + 4y; grad u . grad v = -6 over area 1/2
        let u = s.interpolate(|p| 1.0 + 2.0 * p.x - p.y);
        let v = s.interpolate(|p| 3.0 - p.x + 4.0 * p.y);
        assert!((f.volume_stiffness.bilinear(&u, &v) + 3.0).abs() < 1e-13);
    }

    #[test]
    fn forms_are_symmetric_and_positive() {
        let s = disk_space(20, 3, 3);
        let f = assemble_forms(&s).unwrap();
        let a = f.a();
        for m in [&a, &f.volume_mass, &f.boundary_mass, &f.boundary_stiffness] {
            assert!(m.asymmetry() <= 1e-12);
        }
        let bmask: std::collections::HashSet<usize> = s.boundary_dofs().iter().copied().collect();
        for i in 0..s.n_dofs() {
            assert!(a.get(i, i) > 0.0);
            assert!(f.volume_mass.get(i, i) > 0.0);
            assert_eq!(f.boundary_mass.get(i, i) > 0.0, bmask.contains(&i));
        }
        let x: Vec<f64> = (0..s.n_dofs()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        assert!(a.bilinear(&x, &x) > 0.0);
    }

    #[test]
    fn quadrature_saturation() {
        let s = disk_space(20, 3, 3);
        let opts = AssemblyOptions::for_space(&s);
        let lo = assemble_forms_with(&s, opts).unwrap();
        let hi = assemble_forms_with(
            &s,
            AssemblyOptions {
                volume_degree: opts.volume_degree + 2,
                boundary_degree: opts.boundary_degree + 2,
            },
        )
        .unwrap();
        for (x, y) in [
            (lo.a(), hi.a()),
            (lo.volume_mass.clone(), hi.volume_mass.clone()),
            (lo.boundary_mass.clone(), hi.boundary_mass.clone()),
        ] {
            let diff = x.add_scaled(&y, -1.0);
            assert!(diff.max_abs() < 1e-11 * x.max_abs(), "{}", diff.max_abs() / x.max_abs());
        }
    }

    #[test]
    fn assembly_is_deterministic() {
        let s = disk_space(40, 2, 2);
        let a = assemble_a(&s).unwrap();
        let b = assemble_a(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn placement_parsing() {
        assert_eq!("Boundary".parse::<MassPlacement>().unwrap(), MassPlacement::Boundary);
        assert_eq!("volume".parse::<MassPlacement>().unwrap(), MassPlacement::Volume);
        assert!("surface".parse::<MassPlacement>().is_err());
        assert_eq!(MassPlacement::Boundary.to_string(), "boundary");
    }
}
