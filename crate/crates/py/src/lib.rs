//! Python bindings for `julia-conformal`.
//!
//! Points cross the boundary as Python `complex`. Structured results
//! (density histories, selections, experiment reports) are returned as
//! plain dicts built from the same JSON shape the CLI writes.

use julia_conformal as jc;
use jc::ergodic::{ExperimentConfig, TestFunction};
use jc::selector::{ObjectiveForm, ObjectiveParams};
use jc::ComplexPoint;
use pyo3::create_exception;
use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(julia_conformal_py, NonConvergenceError, PyRuntimeError);
create_exception!(julia_conformal_py, ResourceError, PyRuntimeError);

fn py_err(e: jc::Error) -> PyErr {
    let message = e.to_string();
    match e.root() {
        jc::Error::NonConvergence { .. } => NonConvergenceError::new_err(message),
        jc::Error::Resource { .. } => ResourceError::new_err(message),
        jc::Error::NotAttained { .. } => PyRuntimeError::new_err(message),
        _ => PyValueError::new_err(message),
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_form(form: &str) -> PyResult<ObjectiveForm> {
    match form {
        "conformal" => Ok(ObjectiveForm::Conformal),
        "shifted" => Ok(ObjectiveForm::Shifted),
        "appendix" => Ok(ObjectiveForm::Appendix),
        other => Err(PyValueError::new_err(format!(
            "unknown objective form {other:?}; expected conformal, shifted or appendix"
        ))),
    }
}

/// The quadratic map `T(z) = z^2 + c`.
#[pyclass(name = "QuadraticMap", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyQuadraticMap(jc::QuadraticMap);

#[pymethods]
impl PyQuadraticMap {
    #[new]
    #[pyo3(signature = (c = ComplexPoint::new(0.125, 0.0)))]
    fn new(c: ComplexPoint) -> PyResult<Self> {
        jc::QuadraticMap::new(c).map(Self).map_err(py_err)
    }

    #[getter]
    fn c(&self) -> ComplexPoint {
        self.0.c()
    }

    fn __call__(&self, z: ComplexPoint) -> PyResult<ComplexPoint> {
        self.0.forward(z).map_err(py_err)
    }

    fn derivative(&self, z: ComplexPoint) -> ComplexPoint {
        self.0.derivative(z)
    }

    /// Both preimages `(+sqrt(z - c), -sqrt(z - c))`.
    fn inverse_branches(&self, z: ComplexPoint) -> (ComplexPoint, ComplexPoint) {
        self.0.inverse_branches(z)
    }

    /// `[z, T z, ..., T^n z]`.
    fn orbit(&self, z: ComplexPoint, n: usize) -> PyResult<Vec<ComplexPoint>> {
        self.0.orbit(z, n).map_err(py_err)
    }

    fn repelling_fixed_point(&self) -> PyResult<ComplexPoint> {
        jc::find_repelling_fixed_point(&self.0).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        let c = self.0.c();
        format!("QuadraticMap(c=({}{:+}j))", c.re, c.im)
    }
}

#[pyclass(name = "BorelCover", frozen)]
struct PyBorelCover(jc::BorelCover);

#[pymethods]
impl PyBorelCover {
    #[new]
    #[pyo3(signature = (map, m, z0 = None))]
    fn new(map: &PyQuadraticMap, m: u32, z0: Option<ComplexPoint>) -> PyResult<Self> {
        let z0 = match z0 {
            Some(z) => z,
            None => jc::find_repelling_fixed_point(&map.0).map_err(py_err)?,
        };
        jc::borel_centers(&map.0, z0, m).map(Self).map_err(py_err)
    }

    #[getter]
    fn centers(&self) -> Vec<ComplexPoint> {
        self.0.centers.clone()
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.0.radius
    }

    #[getter]
    fn m(&self) -> u32 {
        self.0.m_cover
    }

    #[getter]
    fn z0(&self) -> ComplexPoint {
        self.0.z0
    }

    #[getter]
    fn map(&self) -> PyQuadraticMap {
        PyQuadraticMap(self.0.map)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Mean of a built-in test function (`modulus`, `real`, `imag`,
    /// `modulus_squared`) over the centers.
    #[pyo3(signature = (g = "modulus"))]
    fn reference_integral(&self, g: &str) -> PyResult<f64> {
        let g = TestFunction::builtin(g).map_err(py_err)?;
        jc::ergodic::reference_integral(&self.0, &g).map_err(py_err)
    }

    /// Densities at every center and its image, used by the selector.
    #[pyo3(signature = (h, tol = 1e-4))]
    fn density_cache(&self, py: Python<'_>, h: f64, tol: f64) -> PyResult<PyDensityCache> {
        py.detach(|| jc::density_cache(&self.0, h, tol))
            .map(PyDensityCache)
            .map_err(py_err)
    }

    #[pyo3(signature = (ell, depth, seed = 0))]
    fn lattice(&self, py: Python<'_>, ell: usize, depth: usize, seed: u64) -> PyResult<PyLattice> {
        py.detach(|| jc::make_lattice(&self.0, ell, depth, seed))
            .map(PyLattice)
            .map_err(py_err)
    }
}

#[pyclass(name = "DensityCache", frozen)]
struct PyDensityCache(jc::DensityCache);

#[pymethods]
impl PyDensityCache {
    #[getter]
    fn h(&self) -> f64 {
        self.0.h
    }

    /// `f(z*)` for every center.
    #[getter]
    fn at_center(&self) -> Vec<f64> {
        self.0.entries.iter().map(|e| e.at_center).collect()
    }

    /// `f(T z*)` for every center.
    #[getter]
    fn at_image(&self) -> Vec<f64> {
        self.0.entries.iter().map(|e| e.at_image).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Backward orbits: `row(i)[0]` is a cover center and
/// `T(row(i)[j]) == row(i)[j - 1]`.
#[pyclass(name = "Lattice", frozen)]
struct PyLattice(jc::Lattice);

#[pymethods]
impl PyLattice {
    #[getter]
    fn ell(&self) -> usize {
        self.0.ell()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed()
    }

    #[getter]
    fn anchor_index(&self) -> Vec<usize> {
        self.0.anchor_index().to_vec()
    }

    fn row(&self, i: usize) -> PyResult<Vec<ComplexPoint>> {
        if i >= self.0.ell() {
            return Err(PyIndexError::new_err(format!("row {i} out of range for {} rows", self.0.ell())));
        }
        Ok(self.0.row(i).to_vec())
    }

    /// First `length` points of the forward orbit of the row's deepest point.
    fn forward_trajectory(&self, i: usize, length: usize) -> PyResult<Vec<ComplexPoint>> {
        if i >= self.0.ell() || length > self.0.depth() + 1 {
            return Err(PyIndexError::new_err("row or length out of range"));
        }
        Ok(self.0.forward_trajectory(i, length))
    }

    fn forward_recovery_drift(&self, map: &PyQuadraticMap, i: usize) -> PyResult<f64> {
        if i >= self.0.ell() {
            return Err(PyIndexError::new_err(format!("row {i} out of range")));
        }
        Ok(self.0.forward_recovery_drift(&map.0, i))
    }

    fn max_step_defect(&self, map: &PyQuadraticMap) -> f64 {
        self.0.max_step_defect(&map.0)
    }

    /// Row minimizing the conformal residual for a sum of length `n`.
    #[pyo3(signature = (cover, densities, n, form = "conformal"))]
    fn select<'py>(
        &self,
        py: Python<'py>,
        cover: &PyBorelCover,
        densities: &PyDensityCache,
        n: usize,
        form: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let params = ObjectiveParams::new(n, &cover.0, &densities.0).with_form(parse_form(form)?);
        let point = py
            .detach(|| jc::selector::select_pseudorandom(&self.0, &params))
            .map_err(py_err)?;
        to_dict(py, &point)
    }
}

/// `L_h^n 1 (z)`.
#[pyfunction]
fn transfer_iterate(py: Python<'_>, map: &PyQuadraticMap, z: ComplexPoint, h: f64, n: usize) -> PyResult<f64> {
    py.detach(|| jc::transfer_iterate(&map.0, z, h, n)).map_err(py_err)
}

/// `[L_h^1 1 (z), ..., L_h^n 1 (z)]`.
#[pyfunction]
fn transfer_levels(py: Python<'_>, map: &PyQuadraticMap, z: ComplexPoint, h: f64, n: usize) -> PyResult<Vec<f64>> {
    py.detach(|| jc::transfer::transfer_levels(&map.0, z, h, n)).map_err(py_err)
}

/// Converged density value; raises `NonConvergenceError` when the level
/// cap is hit first. With `history=True` returns the full level history.
#[pyfunction]
#[pyo3(signature = (map, z, h, tol = 1e-4, history = false))]
fn density<'py>(
    py: Python<'py>,
    map: &PyQuadraticMap,
    z: ComplexPoint,
    h: f64,
    tol: f64,
    history: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let result = py.detach(|| jc::density(&map.0, z, h, tol)).map_err(py_err)?;
    if history {
        return to_dict(py, &result);
    }
    let value = result.require_converged(z).map_err(py_err)?;
    Ok(value.into_pyobject(py)?.into_any())
}

/// Bisection for the exponent at which `L_h^n 1` stops growing.
#[pyfunction]
#[pyo3(signature = (map, h_lo = 0.5, h_hi = 1.99, tol_h = 1e-4, z0 = None, probe = 18))]
fn estimate_dimension(
    py: Python<'_>,
    map: &PyQuadraticMap,
    h_lo: f64,
    h_hi: f64,
    tol_h: f64,
    z0: Option<ComplexPoint>,
    probe: usize,
) -> PyResult<f64> {
    let z0 = match z0 {
        Some(z) => z,
        None => jc::find_repelling_fixed_point(&map.0).map_err(py_err)?,
    };
    py.detach(|| jc::transfer::estimate_dimension_with_probe(&map.0, z0, h_lo, h_hi, tol_h, probe))
        .map(|est| est.h)
        .map_err(py_err)
}

/// Ensemble of `alpha` independent selections and Birkhoff averages.
#[pyfunction]
#[pyo3(signature = (cover, densities, ell = 100, depth = 32000, n = 100, alpha = 30, seed = 0, form = "conformal", g = "modulus"))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    cover: &PyBorelCover,
    densities: &PyDensityCache,
    ell: usize,
    depth: usize,
    n: usize,
    alpha: usize,
    seed: u64,
    form: &str,
    g: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mut config = ExperimentConfig::new(&cover.0, &densities.0, ell, depth, n);
    config.form = parse_form(form)?;
    config.g = TestFunction::builtin(g).map_err(py_err)?;
    let report = py
        .detach(|| jc::ergodic::run_experiment(&config, alpha, seed))
        .map_err(py_err)?;
    to_dict(py, &report)
}

#[pymodule]
fn julia_conformal_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQuadraticMap>()?;
    m.add_class::<PyBorelCover>()?;
    m.add_class::<PyDensityCache>()?;
    m.add_class::<PyLattice>()?;
    m.add_function(wrap_pyfunction!(transfer_iterate, m)?)?;
    m.add_function(wrap_pyfunction!(transfer_levels, m)?)?;
    m.add_function(wrap_pyfunction!(density, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add("NonConvergenceError", m.py().get_type::<NonConvergenceError>())?;
    m.add("ResourceError", m.py().get_type::<ResourceError>())?;
    Ok(())
}
