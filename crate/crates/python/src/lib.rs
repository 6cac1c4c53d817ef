use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ventcel::analysis::{self, StudyConfig};
use ventcel::assembly::{assemble_forms, FeSpace, MassPlacement};
use ventcel::eigsolve::{solve_generalized, EigenOptions};
use ventcel::geometry::SmoothDomain;
use ventcel::mesh::{curve_mesh, generate_star_mesh, write_msh, AffineMesh, CurvedMesh};
use ventcel::{Error, Point2};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyIOError::new_err(e.to_string()),
        e @ (Error::NotConverged { .. } | Error::InnerSolveFailure(_) | Error::PartialReport { .. }) => {
            PyRuntimeError::new_err(e.to_string())
        }
        e => PyValueError::new_err(e.to_string()),
    }
}

/// A smooth planar domain: the unit disk or a flower-shaped star domain.
#[pyclass(name = "Domain", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDomain {
    inner: SmoothDomain,
}

#[pymethods]
impl PyDomain {
    #[staticmethod]
    fn disk() -> Self {
        PyDomain {
            inner: SmoothDomain::unit_disk(),
        }
    }

    #[staticmethod]
    #[pyo3(signature = (alpha = 0.3, beta = 0.4))]
    fn flower(alpha: f64, beta: f64) -> PyResult<Self> {
        Ok(PyDomain {
            inner: SmoothDomain::flower(alpha, beta).map_err(to_py)?,
        })
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    fn perimeter(&self) -> f64 {
        self.inner.perimeter()
    }

    fn signed_distance(&self, x: f64, y: f64) -> PyResult<f64> {
        self.inner.signed_distance(&Point2::new(x, y)).map_err(to_py)
    }

    /// Closest boundary point `(x, y)` and its curve parameter.
    fn closest_point(&self, x: f64, y: f64) -> PyResult<((f64, f64), f64)> {
        let c = self.inner.closest_point(&Point2::new(x, y)).map_err(to_py)?;
        Ok(((c.point.x, c.point.y), c.theta))
    }
}

/// A mesh of geometric order `order` with `nb` boundary edges.
#[pyclass(name = "Mesh", frozen)]
struct PyMesh {
    base: AffineMesh,
    curved: Arc<CurvedMesh>,
}

#[pymethods]
impl PyMesh {
    #[new]
    #[pyo3(signature = (domain, nb = 20, order = 1))]
    fn new(domain: &PyDomain, nb: usize, order: usize) -> PyResult<Self> {
        let base = generate_star_mesh(&domain.inner, nb).map_err(to_py)?;
        let curved = curve_mesh(&base, &domain.inner, order).map_err(to_py)?;
        Ok(PyMesh {
            base,
            curved: Arc::new(curved),
        })
    }

    #[getter]
    fn h(&self) -> f64 {
        self.base.h
    }

    #[getter]
    fn order(&self) -> usize {
        self.curved.order()
    }

    fn n_vertices(&self) -> usize {
        self.base.n_vertices()
    }

    fn n_triangles(&self) -> usize {
        self.base.n_triangles()
    }

    fn n_boundary_edges(&self) -> usize {
        self.base.boundary_edges.len()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.base.vertices.iter().map(|v| (v.x, v.y)).collect()
    }

    fn triangles(&self) -> Vec<[usize; 3]> {
        self.base.triangles.clone()
    }

    fn area(&self) -> PyResult<f64> {
        self.curved.area().map_err(to_py)
    }

    fn boundary_length(&self) -> PyResult<f64> {
        self.curved.boundary_length().map_err(to_py)
    }

    fn write_msh(&self, path: &str) -> PyResult<()> {
        write_msh(&self.base, path).map_err(to_py)
    }

    /// Smallest eigenvalues of the discrete problem with `P^degree` elements.
    #[pyo3(signature = (degree = 1, n_eig = 10, placement = "boundary", shift = -1.0, tol = 1e-12, seed = 0))]
    fn eigenvalues(
        &self,
        degree: usize,
        n_eig: usize,
        placement: &str,
        shift: f64,
        tol: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        let placement: MassPlacement = placement.parse().map_err(to_py)?;
        let space = FeSpace::new(self.curved.clone(), degree).map_err(to_py)?;
        let forms = assemble_forms(&space).map_err(to_py)?;
        let opts = EigenOptions {
            n_eig,
            shift,
            tol,
            seed,
            ..EigenOptions::default()
        };
        let res = solve_generalized(&forms.a(), &forms.m(placement), &opts).map_err(to_py)?;
        Ok(res.values)
    }

    /// Number of degrees of freedom of the `P^degree` space.
    fn n_dofs(&self, degree: usize) -> PyResult<usize> {
        Ok(FeSpace::new(self.curved.clone(), degree).map_err(to_py)?.n_dofs())
    }
}

/// Result of a convergence study.
#[pyclass(name = "StudyReport", frozen)]
struct PyStudyReport {
    inner: analysis::StudyReport,
}

#[pymethods]
impl PyStudyReport {
    #[getter]
    fn reference(&self) -> f64 {
        self.inner.reference
    }

    /// `(level, h, ndof, lambda, e_lambda, e_l2, e_h10)` per level.
    #[allow(clippy::type_complexity)]
    fn levels(&self) -> Vec<(usize, f64, usize, f64, f64, Option<f64>, Option<f64>)> {
        self.inner
            .levels
            .iter()
            .map(|l| (l.level, l.h, l.ndof, l.lambda, l.e_lambda, l.e_l2, l.e_h10))
            .collect()
    }

    /// `((n, n + 1), order_lambda, order_l2, order_h10)` per level pair.
    fn eoc(&self) -> Vec<((usize, usize), f64, f64, f64)> {
        self.inner
            .eoc
            .iter()
            .map(|r| (r.pair, r.order_lambda, r.order_l2, r.order_h10))
            .collect()
    }

    fn table(&self) -> String {
        analysis::format_table(&self.inner)
    }

    fn levels_csv(&self) -> String {
        self.inner.levels_csv()
    }

    fn eoc_csv(&self) -> String {
        self.inner.eoc_csv()
    }
}

/// Run a study described by `key = value` config text.
#[pyfunction]
fn run_study(py: Python<'_>, config: &str) -> PyResult<PyStudyReport> {
    let cfg = StudyConfig::parse(config).map_err(to_py)?;
    let report = py.detach(|| analysis::run_study(&cfg)).map_err(to_py)?;
    Ok(PyStudyReport { inner: report })
}

#[pyfunction]
fn eoc(errors: Vec<f64>, hs: Vec<f64>) -> PyResult<Vec<f64>> {
    analysis::eoc(&errors, &hs).map_err(to_py)
}

/// `(lambda, multiplicity)` for the first `count` ranks on the unit disk.
#[pyfunction]
fn analytic_eigenvalues_disk(count: usize) -> Vec<(f64, usize)> {
    analysis::analytic_eigenvalues_disk(count)
}

#[pymodule]
fn pyventcel(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDomain>()?;
    m.add_class::<PyMesh>()?;
    m.add_class::<PyStudyReport>()?;
    m.add_function(wrap_pyfunction!(run_study, m)?)?;
    m.add_function(wrap_pyfunction!(eoc, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_eigenvalues_disk, m)?)?;
    Ok(())
}
