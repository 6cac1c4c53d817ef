//! Reference elements: the unit triangle `{(x, y) : x, y >= 0, x + y <= 1}`
//! with vertices `(0,0)`, `(1,0)`, `(0,1)` and the unit segment `[0, 1]`.
//!
//! Lagrange bases use the equispaced principal lattice. Local node order is:
//! vertices, then the interior nodes of edge 0 (`v0 -> v1`), edge 1
//! (`v1 -> v2`), edge 2 (`v2 -> v0`), each listed from the first to the second
//! endpoint, then the cell-interior nodes. On the segment: `t = 0`, `t = 1`,
//! then the interior nodes by increasing `t`.

use crate::{Error, Point2, Result};

pub const MAX_LAGRANGE_DEGREE: usize = 6;
pub const MAX_QUADRATURE_DEGREE: usize = 40;

/// Local vertex pairs of the triangle edges.
pub const TRIANGLE_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Gradients of the barycentric coordinates `(1 - x - y, x, y)`.
pub const BARYCENTRIC_GRADIENTS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

pub fn reference_vertex(i: usize) -> Point2 {
    Point2::new(REFERENCE_VERTICES[i][0], REFERENCE_VERTICES[i][1])
}

/// Barycentric coordinates of a reference-triangle point.
pub fn barycentric(x: &Point2) -> [f64; 3] {
    [1.0 - x.x - x.y, x.x, x.y]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefDim {
    Segment,
    Triangle,
}

impl RefDim {
    pub fn measure(self) -> f64 {
        match self {
            RefDim::Segment => 1.0,
            RefDim::Triangle => 0.5,
        }
    }
}

/// Equispaced Lagrange basis of degree `k` on a reference element.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    dim: RefDim,
    degree: usize,
    /// Integer lattice indices: barycentric coordinate `m` of node `i` is
    /// `lattice[i][m] / degree`. Unused slots are zero.
    lattice: Vec<[usize; 3]>,
}

/// Basis values and reference gradients at one point. In 1D only the first
/// gradient component is meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub gradients: Vec<Point2>,
}

/// Lattice nodes as barycentric coordinates (two entries used on the segment).
pub fn lagrange_nodes(dim: RefDim, k: usize) -> Result<Vec<[f64; 3]>> {
    let basis = LagrangeBasis::new(dim, k)?;
    Ok(basis
        .lattice
        .iter()
        .map(|ix| ix.map(|i| i as f64 / k as f64))
        .collect())
}

impl LagrangeBasis {
    pub fn new(dim: RefDim, degree: usize) -> Result<Self> {
        if !(1..=MAX_LAGRANGE_DEGREE).contains(&degree) {
            return Err(Error::UnsupportedDegree {
                degree,
                min: 1,
                max: MAX_LAGRANGE_DEGREE,
            });
        }
        let k = degree;
        let mut lattice = Vec::new();
        match dim {
            RefDim::Segment => {
                lattice.push([k, 0, 0]);
                lattice.push([0, k, 0]);
                for s in 1..k {
                    lattice.push([k - s, s, 0]);
                }
            }
            RefDim::Triangle => {
                for m in 0..3 {
                    let mut ix = [0; 3];
                    ix[m] = k;
                    lattice.push(ix);
                }
                for &(a, b) in &TRIANGLE_EDGES {
                    for s in 1..k {
                        let mut ix = [0; 3];
                        ix[a] = k - s;
                        ix[b] = s;
                        lattice.push(ix);
                    }
                }
                for j in 1..k {
                    for i in 1..k - j {
                        lattice.push([k - i - j, i, j]);
                    }
                }
            }
        }
        Ok(LagrangeBasis { dim, degree, lattice })
    }

    pub fn triangle(degree: usize) -> Result<Self> {
        Self::new(RefDim::Triangle, degree)
    }

    pub fn segment(degree: usize) -> Result<Self> {
        Self::new(RefDim::Segment, degree)
    }

    pub fn dim(&self) -> RefDim {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn lattice(&self) -> &[[usize; 3]] {
        &self.lattice
    }

    /// Reference coordinates of the nodes (`(t, 0)` on the segment).
    pub fn node_points(&self) -> Vec<Point2> {
        let k = self.degree as f64;
        self.lattice
            .iter()
            .map(|ix| match self.dim {
                RefDim::Segment => Point2::new(ix[1] as f64 / k, 0.0),
                RefDim::Triangle => Point2::new(ix[1] as f64 / k, ix[2] as f64 / k),
            })
            .collect()
    }

    /// Local indices of the nodes on triangle edge `e`, ordered from its first
    /// to its second endpoint (endpoints included).
    pub fn edge_nodes(&self, e: usize) -> Vec<usize> {
        assert_eq!(self.dim, RefDim::Triangle);
        let (a, b) = TRIANGLE_EDGES[e];
        let k = self.degree;
        let mut out = Vec::with_capacity(k + 1);
        out.push(a);
        out.extend((0..k - 1).map(|s| 3 + e * (k - 1) + s));
        out.push(b);
        out
    }

    /// Number of cell-interior nodes.
    pub fn interior_count(&self) -> usize {
        match self.dim {
            RefDim::Segment => self.degree - 1,
            RefDim::Triangle => (self.degree - 1) * (self.degree.saturating_sub(2)) / 2,
        }
    }

    pub fn eval(&self, x: &Point2) -> BasisEval {
        let mut values = vec![0.0; self.len()];
        let mut gradients = vec![Point2::zeros(); self.len()];
        self.eval_into(x, &mut values, &mut gradients);
        BasisEval { values, gradients }
    }

    pub fn eval_into(&self, x: &Point2, values: &mut [f64], gradients: &mut [Point2]) {
        let k = self.degree;
        let lam: [f64; 3] = match self.dim {
            RefDim::Segment => [1.0 - x.x, x.x, 0.0],
            RefDim::Triangle => barycentric(x),
        };
        // factor tables f[m][i] = prod_{j<i} (k lam_m - j) / (j + 1) and derivatives in lam_m
        let mut f = [[0.0; MAX_LAGRANGE_DEGREE + 1]; 3];
        let mut df = [[0.0; MAX_LAGRANGE_DEGREE + 1]; 3];
        for m in 0..3 {
            f[m][0] = 1.0;
            df[m][0] = 0.0;
            let kl = k as f64 * lam[m];
            for i in 1..=k {
                let c = (kl - (i - 1) as f64) / i as f64;
                f[m][i] = f[m][i - 1] * c;
                df[m][i] = df[m][i - 1] * c + f[m][i - 1] * (k as f64 / i as f64);
            }
        }
        for (n, ix) in self.lattice.iter().enumerate() {
            let a = [f[0][ix[0]], f[1][ix[1]], f[2][ix[2]]];
            let da = [df[0][ix[0]], df[1][ix[1]], df[2][ix[2]]];
            values[n] = a[0] * a[1] * a[2];
            let dl = [da[0] * a[1] * a[2], a[0] * da[1] * a[2], a[0] * a[1] * da[2]];
            gradients[n] = match self.dim {
                RefDim::Segment => Point2::new(dl[1] - dl[0], 0.0),
                RefDim::Triangle => Point2::new(dl[1] - dl[0], dl[2] - dl[0]),
            };
        }
    }

    /// Values and gradients at every point of a rule.
    pub fn tabulate(&self, points: &[Point2]) -> Tabulation {
        let n = self.len();
        let mut values = vec![0.0; n * points.len()];
        let mut gradients = vec![Point2::zeros(); n * points.len()];
        for (q, p) in points.iter().enumerate() {
            self.eval_into(p, &mut values[q * n..(q + 1) * n], &mut gradients[q * n..(q + 1) * n]);
        }
        Tabulation {
            n_basis: n,
            values,
            gradients,
        }
    }
}

/// Basis functions tabulated at a list of points, point-major.
#[derive(Debug, Clone)]
pub struct Tabulation {
    n_basis: usize,
    values: Vec<f64>,
    gradients: Vec<Point2>,
}

impl Tabulation {
    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_basis..(q + 1) * self.n_basis]
    }

    pub fn gradients(&self, q: usize) -> &[Point2] {
        &self.gradients[q * self.n_basis..(q + 1) * self.n_basis]
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub dim: RefDim,
    /// Reference coordinates (`(t, 0)` on the segment).
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&Point2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

/// A rule exact for polynomials of total degree `required_degree`.
///
/// Segment: Gauss-Legendre. Triangle: collapsed (Duffy) tensor product of
/// Gauss-Legendre rules, so all weights are positive and all points interior.
pub fn quadrature(dim: RefDim, required_degree: usize) -> Result<QuadratureRule> {
    if required_degree > MAX_QUADRATURE_DEGREE {
        return Err(Error::UnsupportedDegree {
            degree: required_degree,
            min: 0,
            max: MAX_QUADRATURE_DEGREE,
        });
    }
    match dim {
        RefDim::Segment => {
            let n = required_degree / 2 + 1;
            let (t, w) = gauss_legendre(n);
            Ok(QuadratureRule {
                dim,
                points: t.iter().map(|&t| Point2::new(t, 0.0)).collect(),
                weights: w,
                exactness_degree: 2 * n - 1,
            })
        }
        RefDim::Triangle => {
            // integrand in the collapsed variable u picks up the factor (1 - u)
            let nu = (required_degree + 2).div_ceil(2);
            let nv = (required_degree + 1).div_ceil(2);
            let (u, wu) = gauss_legendre(nu);
            let (v, wv) = gauss_legendre(nv);
            let mut points = Vec::with_capacity(nu * nv);
            let mut weights = Vec::with_capacity(nu * nv);
            for (ui, wui) in u.iter().zip(&wu) {
                for (vj, wvj) in v.iter().zip(&wv) {
                    points.push(Point2::new(*ui, (1.0 - ui) * vj));
                    weights.push(wui * wvj * (1.0 - ui));
                }
            }
            Ok(QuadratureRule {
                dim,
                points,
                weights,
                exactness_degree: (2 * nu - 2).min(2 * nv - 1),
            })
        }
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess on [-1, 1], Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
