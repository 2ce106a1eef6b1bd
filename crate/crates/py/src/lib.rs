//! Python module `helmhj`: grids, fields, the differential operators, the
//! Helmholtz-Hodge split, the rotor scenario, Klein-Gordon checks and the
//! command runners. Field values cross the boundary as flat lists in
//! row-major order (last axis fastest).

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use helmhj::classical::{RotorScenario, ThetaForm};
use helmhj::commands::{self, Command, RunConfig};
use helmhj::io::FieldData;
use helmhj::kg::{self, PhysicalConstants};
use helmhj::{helmholtz, ops, Axis, Error, SolverConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NotConverged { .. } | Error::StepRejected { .. } | Error::TrajectoryCrossing => {
            PyRuntimeError::new_err(e.to_string())
        }
        Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(module = "helmhj", name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(helmhj::Grid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(counts: Vec<usize>, lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        if counts.len() != lo.len() || counts.len() != hi.len() {
            return Err(PyValueError::new_err(
                "counts, lo and hi need equal lengths",
            ));
        }
        let axes = (0..counts.len())
            .map(|a| Axis::new(lo[a], hi[a], counts[a]))
            .collect();
        helmhj::Grid::new(axes).map(Self).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn counts(&self) -> Vec<usize> {
        self.0.axes().iter().map(|a| a.count).collect()
    }

    #[getter]
    fn spacing(&self) -> Vec<f64> {
        (0..self.0.dim()).map(|a| self.0.spacing(a)).collect()
    }

    /// Coordinates of every node, row-major.
    fn points(&self) -> Vec<Vec<f64>> {
        (0..self.0.len())
            .map(|i| self.0.point(i)[..self.0.dim()].to_vec())
            .collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        let axes: Vec<String> = self
            .0
            .axes()
            .iter()
            .map(|a| format!("{}:[{}, {}]", a.count, a.lo, a.hi))
            .collect();
        format!("Grid({})", axes.join(", "))
    }
}

#[pyclass(module = "helmhj", name = "ScalarField", skip_from_py_object)]
#[derive(Clone)]
struct PyScalar(helmhj::ScalarField);

#[pymethods]
impl PyScalar {
    #[new]
    fn new(grid: PyRef<'_, PyGrid>, values: Vec<f64>) -> PyResult<Self> {
        helmhj::ScalarField::new(grid.0.clone(), values)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid.clone())
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values.clone()
    }

    fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }
}

#[pyclass(module = "helmhj", name = "VectorField", skip_from_py_object)]
#[derive(Clone)]
struct PyVector(helmhj::VectorField);

#[pymethods]
impl PyVector {
    #[new]
    fn new(grid: PyRef<'_, PyGrid>, components: Vec<Vec<f64>>) -> PyResult<Self> {
        helmhj::VectorField::new(grid.0.clone(), components)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid.clone())
    }

    #[getter]
    fn components(&self) -> Vec<Vec<f64>> {
        self.0.components.clone()
    }

    fn max_abs(&self) -> f64 {
        self.0.max_abs()
    }
}

#[pyfunction]
fn gradient(s: PyRef<'_, PyScalar>) -> PyResult<PyVector> {
    ops::gradient(&s.0).map(PyVector).map_err(py_err)
}

#[pyfunction]
fn divergence(v: PyRef<'_, PyVector>) -> PyResult<PyScalar> {
    ops::divergence(&v.0).map(PyScalar).map_err(py_err)
}

#[pyfunction]
fn curl(v: PyRef<'_, PyVector>) -> PyResult<PyVector> {
    ops::curl(&v.0).map(PyVector).map_err(py_err)
}

#[pyfunction]
fn laplacian(s: PyRef<'_, PyScalar>) -> PyResult<PyScalar> {
    ops::laplacian(&s.0).map(PyScalar).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (s, c = 1.0))]
fn dalembertian(s: PyRef<'_, PyScalar>, c: f64) -> PyResult<PyScalar> {
    ops::dalembertian(&s.0, c).map(PyScalar).map_err(py_err)
}

#[pyclass(module = "helmhj", name = "Decomposition", frozen)]
struct PyDecomposition(helmholtz::Decomposition);

#[pymethods]
impl PyDecomposition {
    #[getter]
    fn phi(&self) -> PyScalar {
        PyScalar(self.0.phi.clone())
    }

    /// Vector potential (the stream function in 2D).
    #[getter]
    fn lam(&self) -> PyVector {
        PyVector(self.0.lambda.clone())
    }

    #[getter]
    fn t(&self) -> PyVector {
        PyVector(self.0.t.clone())
    }

    /// Diagnostics as a JSON string.
    fn diagnostics_json(&self) -> String {
        serde_json::to_string(&self.0.diagnostics).expect("diagnostics serialize")
    }

    fn reconstruction_error(&self) -> f64 {
        self.0.diagnostics.reconstruction_error
    }
}

#[pyfunction]
#[pyo3(signature = (f, tol = 1e-8))]
fn decompose(f: PyRef<'_, PyVector>, tol: f64) -> PyResult<PyDecomposition> {
    helmholtz::decompose(&f.0, &SolverConfig::with_tolerance(tol))
        .map(PyDecomposition)
        .map_err(py_err)
}

#[pyclass(module = "helmhj", name = "RotorScenario", frozen)]
struct PyRotor(RotorScenario);

fn form(printed: bool) -> ThetaForm {
    if printed {
        ThetaForm::Printed
    } else {
        ThetaForm::Corrected
    }
}

#[pymethods]
impl PyRotor {
    #[new]
    #[pyo3(signature = (omega = 1.0, mass = 1.0, t0 = 0.0))]
    fn new(omega: f64, mass: f64, t0: f64) -> Self {
        Self(RotorScenario::new(omega, mass, t0))
    }

    fn flow_map(&self, r0: [f64; 3], t: f64) -> [f64; 3] {
        self.0.flow_map(r0, t)
    }

    fn inverse_flow_map(&self, r: [f64; 3], t: f64) -> [f64; 3] {
        self.0.inverse_flow_map(r, t)
    }

    fn vorticity(&self, t: f64) -> f64 {
        self.0.vorticity(t)
    }

    #[pyo3(signature = (r, t, printed = false))]
    fn hj_residual_at(&self, r: [f64; 3], t: f64, printed: bool) -> f64 {
        self.0.hj_residual_at(r, t, form(printed))
    }

    #[pyo3(signature = (r, t, printed = false))]
    fn lorentz_residual_at(&self, r: [f64; 3], t: f64, printed: bool) -> [f64; 3] {
        self.0.lorentz_residual_at(r, t, form(printed))
    }
}

/// Madelung residual norms of `Σ a e^{i(kx − Ωt)}` on a `(t, x)` grid:
/// a dict of max norms over unmasked points plus `mask_fraction`.
#[pyfunction]
#[pyo3(signature = (waves, grid, mass = 1.0, c = 1.0, hbar = 1.0))]
fn kg_check<'py>(
    py: Python<'py>,
    waves: Vec<(f64, f64)>,
    grid: PyRef<'_, PyGrid>,
    mass: f64,
    c: f64,
    hbar: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let consts = PhysicalConstants {
        m: mass,
        c,
        q: 0.0,
        hbar,
    };
    let run = || -> helmhj::Result<Vec<(&'static str, f64)>> {
        let psi = kg::make_superposition(&waves, &consts, &grid.0)?;
        let mut st = kg::madelung(&psi, &consts)?;
        let sol = kg::solve_omega(&st)?;
        st.set_omega(&sol)?;
        let m = |v: &[f64]| kg::masked_max(v, &st.mask);
        Ok(vec![
            ("kg", m(&st.kg_residual()?.values)),
            ("continuity", m(&st.continuity_residual()?.values)),
            ("quantum_hj", m(&st.quantum_hj_residual()?.values)),
            ("normalization", m(&st.normalization_residual()?.values)),
            ("creation", m(&st.creation_rate()?.values)),
            ("omega", m(&st.omega.magnitude().values)),
            ("mask_fraction", st.mask_fraction()),
        ])
    };
    let out = PyDict::new(py);
    for (k, v) in run().map_err(py_err)? {
        out.set_item(k, v)?;
    }
    Ok(out)
}

#[pyfunction]
fn read_field(path: &str) -> PyResult<(PyGrid, Vec<Vec<f64>>)> {
    let f = helmhj::io::load(path).map_err(py_err)?;
    Ok((PyGrid(f.grid), f.components))
}

#[pyfunction]
fn write_field(path: &str, grid: PyRef<'_, PyGrid>, components: Vec<Vec<f64>>) -> PyResult<()> {
    if components.is_empty() || components.iter().any(|c| c.len() != grid.0.len()) {
        return Err(PyValueError::new_err(
            "every component needs one value per grid point",
        ));
    }
    let data = FieldData {
        grid: grid.0.clone(),
        components,
    };
    helmhj::io::save(path, &data).map_err(py_err)
}

/// Runs `decompose`, `rotor`, `kg-check` or `convergence` with config
/// overrides given as a JSON object and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (command, options = "{}"))]
fn run(command: &str, options: &str) -> PyResult<String> {
    let command: Command = serde_json::from_value(serde_json::Value::String(command.into()))
        .map_err(|e| PyValueError::new_err(format!("unknown command: {e}")))?;
    let mut cfg = serde_json::to_value(RunConfig::new(command)).expect("config serializes");
    let overrides: serde_json::Value = serde_json::from_str(options)
        .map_err(|e| PyValueError::new_err(format!("bad options: {e}")))?;
    let Some(map) = overrides.as_object() else {
        return Err(PyValueError::new_err("options must be a JSON object"));
    };
    for (k, v) in map {
        if k == "command" || cfg.get(k).is_none() {
            return Err(PyValueError::new_err(format!("unknown option {k:?}")));
        }
        cfg[k] = v.clone();
    }
    let cfg: RunConfig = serde_json::from_value(cfg)
        .map_err(|e| PyValueError::new_err(format!("bad options: {e}")))?;
    commands::run(&cfg).map(|r| r.to_json()).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "helmhj")]
fn helmhj_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyScalar>()?;
    m.add_class::<PyVector>()?;
    m.add_class::<PyDecomposition>()?;
    m.add_class::<PyRotor>()?;
    m.add_function(wrap_pyfunction!(gradient, m)?)?;
    m.add_function(wrap_pyfunction!(divergence, m)?)?;
    m.add_function(wrap_pyfunction!(curl, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(dalembertian, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(kg_check, m)?)?;
    m.add_function(wrap_pyfunction!(read_field, m)?)?;
    m.add_function(wrap_pyfunction!(write_field, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
