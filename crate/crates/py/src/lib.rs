//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers (anything indexable works on the way in, including numpy arrays);
//! reports come back as plain dicts.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIndexError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use qdyn_core::channel::{self, KrausSet};
use qdyn_core::evolution::TimeGrid;
use qdyn_core::generator::{is_gksl, GkslSpec, Jump, TimeLocalGenerator};
use qdyn_core::markovianity::{self as mk, Tolerances};
use qdyn_core::rates::RateFunction;
use qdyn_core::report::{self, RunError, RunOptions};
use qdyn_core::scenario::{self, Preset, PRESETS};
use qdyn_core::state::{self, BlochVector, DensityMatrix};
use qdyn_core::{linalg, ComplexMatrix, Error, C64};

create_exception!(qdyn, QdynError, PyException);

type Rows = Vec<Vec<C64>>;

fn py_err(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        QdynError::new_err(e.to_string())
    }
}

fn matrix(rows: Rows) -> PyResult<ComplexMatrix> {
    ComplexMatrix::from_rows(&rows).map_err(py_err)
}

fn rows(m: &ComplexMatrix) -> Rows {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect()).collect()
}

fn density(rows: Rows) -> PyResult<DensityMatrix> {
    DensityMatrix::new(matrix(rows)?).map_err(py_err)
}

/// Round-trips through the json module so dicts, lists and numbers map
/// onto the serde types used by scenario files.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        PyValueError::new_err(if path == "." { e.into_inner().to_string() } else { format!("{path}: {}", e.into_inner()) })
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| QdynError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A linear map on `n x n` matrices, stored as its `n² x n²` matrix in the
/// column-stacking convention.
#[pyclass(name = "Superoperator", module = "qdyn", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySuperoperator(channel::Superoperator);

#[pymethods]
impl PySuperoperator {
    #[new]
    fn new(matrix_rows: Rows) -> PyResult<Self> {
        let m = matrix(matrix_rows)?;
        let dim = (m.rows() as f64).sqrt().round() as usize;
        channel::Superoperator::from_matrix(dim, m).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn identity(dim: usize) -> Self {
        Self(channel::Superoperator::identity(dim))
    }

    #[staticmethod]
    fn from_kraus(operators: Vec<Rows>) -> PyResult<Self> {
        let ops = operators.into_iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        let dim = ops.first().map_or(0, |k| k.cols());
        let set = KrausSet::new(ops).map_err(py_err)?;
        Ok(Self(set.to_superop(dim)))
    }

    #[staticmethod]
    fn from_choi(choi: Rows) -> PyResult<Self> {
        let m = matrix(choi)?;
        let dim = (m.rows() as f64).sqrt().round() as usize;
        let c = channel::ChoiMatrix::from_matrix(dim, m).map_err(py_err)?;
        Ok(Self(channel::superop_from_choi(&c)))
    }

    #[staticmethod]
    fn unitary(u: Rows) -> PyResult<Self> {
        channel::unitary_conjugation(&matrix(u)?).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn transpose(dim: usize) -> Self {
        Self(channel::transpose_map(dim))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn matrix(&self) -> Rows {
        rows(self.0.matrix())
    }

    fn apply(&self, x: Rows) -> PyResult<Rows> {
        self.0.apply(&matrix(x)?).map(|m| rows(&m)).map_err(py_err)
    }

    /// `self ∘ other`
    fn compose(&self, other: &Self) -> PyResult<Self> {
        if self.0.dim() != other.0.dim() {
            return Err(py_err(Error::Dimension(format!("cannot compose dim {} with dim {}", self.0.dim(), other.0.dim()))));
        }
        Ok(Self(self.0.compose(&other.0)))
    }

    fn __matmul__(&self, other: &Self) -> PyResult<Self> {
        self.compose(other)
    }

    fn dual(&self) -> Self {
        Self(channel::dual(&self.0))
    }

    fn choi(&self) -> Rows {
        rows(channel::choi_of(&self.0).matrix())
    }

    fn choi_eigenvalues(&self) -> Vec<f64> {
        channel::choi_of(&self.0).eigenvalues()
    }

    #[pyo3(signature = (tol = linalg::tol::PSD))]
    fn is_cp(&self, tol: f64) -> PyResult<bool> {
        channel::is_cp(&self.0, tol).map(|v| v.is_cp()).map_err(py_err)
    }

    #[pyo3(signature = (tol = linalg::tol::TRACE))]
    fn is_tp(&self, tol: f64) -> bool {
        channel::is_tp(&self.0, tol)
    }

    #[pyo3(signature = (tol = linalg::tol::TRACE))]
    fn is_unital(&self, tol: f64) -> bool {
        channel::is_unital(&self.0, tol)
    }

    fn trace_defect(&self) -> f64 {
        channel::trace_defect(&self.0)
    }

    #[pyo3(signature = (tol = linalg::tol::PSD))]
    fn kraus(&self, tol: f64) -> PyResult<Vec<Rows>> {
        let c = channel::choi_of(&self.0);
        let set = channel::kraus_from_choi(&c, tol).map_err(py_err)?;
        Ok(set.operators.iter().map(rows).collect())
    }

    #[pyo3(signature = (tol = linalg::tol::PSD))]
    fn is_gksl(&self, tol: f64) -> bool {
        is_gksl(&self.0, tol).is_gksl()
    }

    fn exp(&self) -> Self {
        Self(self.0.exp())
    }

    fn __repr__(&self) -> String {
        format!("Superoperator(dim={})", self.0.dim())
    }
}

/// A time-local generator `L_t`.
#[pyclass(name = "Generator", module = "qdyn", frozen)]
struct PyGenerator {
    inner: Box<dyn TimeLocalGenerator>,
    label: String,
}

fn rate_of(obj: &Bound<'_, PyAny>) -> PyResult<RateFunction> {
    let rate = match obj.extract::<f64>() {
        Ok(c) => RateFunction::constant(c),
        Err(_) => from_py(obj)?,
    };
    rate.validate().map_err(py_err)?;
    Ok(rate)
}

#[pymethods]
impl PyGenerator {
    /// A registered preset; `params` uses the same fields as scenario files.
    #[staticmethod]
    #[pyo3(signature = (name, params = None))]
    fn preset(py: Python<'_>, name: &str, params: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let preset = match params {
            Some(p) => {
                let doc = pyo3::types::PyDict::new(py);
                doc.set_item("name", name)?;
                doc.set_item("params", p)?;
                from_py(doc.as_any())?
            }
            None => Preset::by_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset {name}")))?,
        };
        if let Some(d) = preset.check().first() {
            return Err(PyValueError::new_err(d.to_string()));
        }
        Ok(Self {
            inner: preset.build().map_err(py_err)?,
            label: name.to_owned(),
        })
    }

    /// `jumps` is a list of `(operator, rate)`; a rate is a number or a
    /// rate-family dict such as `{"family": "sinusoidal", "c": 1, "omega": 2}`.
    #[staticmethod]
    #[pyo3(signature = (hamiltonian, jumps = Vec::new()))]
    fn gksl(hamiltonian: Rows, jumps: Vec<(Rows, Bound<'_, PyAny>)>) -> PyResult<Self> {
        let jumps = jumps
            .into_iter()
            .map(|(op, rate)| {
                Ok(Jump {
                    operator: matrix(op)?,
                    rate: rate_of(&rate)?,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let spec = GkslSpec::new(matrix(hamiltonian)?, jumps).map_err(py_err)?;
        Ok(Self {
            inner: Box::new(spec),
            label: "gksl".into(),
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn is_constant(&self) -> bool {
        self.inner.is_constant()
    }

    fn at(&self, t: f64) -> PySuperoperator {
        PySuperoperator(self.inner.at(t))
    }

    fn evolve(&self, py: Python<'_>, t_end: f64, steps: usize) -> PyResult<PyTrajectory> {
        let grid = TimeGrid::new(t_end, steps).map_err(py_err)?;
        let (method, traj) = py.detach(|| report::evolve(self.inner.as_ref(), grid)).map_err(py_err)?;
        Ok(PyTrajectory {
            traj,
            method: serde_json::to_value(method).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default(),
        })
    }

    #[pyo3(signature = (t_end, steps, tol_legitimacy = None, tol_divisibility = None))]
    fn classify<'py>(
        &self,
        py: Python<'py>,
        t_end: f64,
        steps: usize,
        tol_legitimacy: Option<f64>,
        tol_divisibility: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let grid = TimeGrid::new(t_end, steps).map_err(py_err)?;
        let mut tols = Tolerances::default();
        tols.legitimacy = tol_legitimacy.unwrap_or(tols.legitimacy);
        tols.divisibility = tol_divisibility.unwrap_or(tols.divisibility);
        let c = py
            .detach(|| {
                report::evolve(self.inner.as_ref(), grid).map(|(_, traj)| mk::classify_trajectory(self.inner.as_ref(), &traj, tols))
            })
            .map_err(py_err)?;
        to_py(py, &c)
    }

    fn __repr__(&self) -> String {
        format!("Generator({}, dim={})", self.label, self.inner.dim())
    }
}

/// Dynamical maps `Λ_{t_k}` on a uniform grid.
#[pyclass(name = "Trajectory", module = "qdyn", frozen)]
struct PyTrajectory {
    traj: qdyn_core::evolution::Trajectory,
    method: String,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn method(&self) -> &str {
        &self.method
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.traj.grid().times()
    }

    fn __len__(&self) -> usize {
        self.traj.maps().len()
    }

    fn __getitem__(&self, k: isize) -> PyResult<PySuperoperator> {
        let n = self.traj.maps().len() as isize;
        let k = if k < 0 { k + n } else { k };
        if !(0..n).contains(&k) {
            return Err(PyIndexError::new_err("trajectory index out of range"));
        }
        Ok(PySuperoperator(self.traj.map(k as usize).clone()))
    }

    /// `Λ_{t_k} ρ` for every grid point.
    fn states(&self, rho: Rows) -> PyResult<Vec<Rows>> {
        let rho = density(rho)?;
        self.traj
            .maps()
            .iter()
            .map(|m| m.apply(rho.matrix()).map(|x| rows(&x)))
            .collect::<Result<_, _>>()
            .map_err(py_err)
    }

    fn trace_distances(&self, rho: Rows, sigma: Rows) -> PyResult<Vec<f64>> {
        mk::trace_distance_series(&self.traj, &density(rho)?, &density(sigma)?).map_err(py_err)
    }

    #[pyo3(signature = (tol = mk::TOL_LEGIT))]
    fn legitimacy<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &mk::legitimacy_report(&self.traj, tol))
    }

    #[pyo3(signature = (tol = mk::TOL_DIV))]
    fn divisibility<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &mk::divisibility_report(&self.traj, tol))
    }

    #[pyo3(signature = (pairs = mk::BLP_PAIRS, seed = report::DEFAULT_SEED, tol = mk::TOL_BLP))]
    fn blp<'py>(&self, py: Python<'py>, pairs: usize, seed: u64, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let r = py.detach(|| mk::blp_report(&self.traj, pairs, seed, tol));
        to_py(py, &r)
    }

    fn __repr__(&self) -> String {
        format!(
            "Trajectory(method={}, steps={}, t_end={})",
            self.method,
            self.traj.grid().steps(),
            self.traj.grid().t_end()
        )
    }
}

#[pyfunction]
fn bloch_to_state(x: f64, y: f64, z: f64) -> PyResult<Rows> {
    state::bloch_to_state(BlochVector::new(x, y, z))
        .map(|r| rows(r.matrix()))
        .map_err(py_err)
}

#[pyfunction]
fn state_to_bloch(rho: Rows) -> PyResult<(f64, f64, f64)> {
    let v = state::state_to_bloch(&density(rho)?).map_err(py_err)?;
    let [x, y, z] = v.to_array();
    Ok((x, y, z))
}

#[pyfunction]
fn trace_distance(rho: Rows, sigma: Rows) -> PyResult<f64> {
    state::trace_distance(&density(rho)?, &density(sigma)?).map_err(py_err)
}

/// `L_t` for the given Hamiltonian and jumps, as a superoperator.
#[pyfunction]
#[pyo3(signature = (hamiltonian, jumps = Vec::new(), t = 0.0))]
fn gksl_generator(hamiltonian: Rows, jumps: Vec<(Rows, Bound<'_, PyAny>)>, t: f64) -> PyResult<PySuperoperator> {
    let g = PyGenerator::gksl(hamiltonian, jumps)?;
    Ok(PySuperoperator(g.inner.at(t)))
}

#[pyfunction]
fn presets() -> Vec<(&'static str, &'static str)> {
    PRESETS.to_vec()
}

#[pyfunction]
fn template<'py>(py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let preset = Preset::by_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown preset {name}")))?;
    to_py(py, &preset.template())
}

/// Problems found in a scenario, as `(path, message)` pairs.
#[pyfunction]
fn validate(scenario: &Bound<'_, PyAny>) -> PyResult<Vec<(String, String)>> {
    let s: scenario::Scenario = from_py(scenario)?;
    Ok(s.validate().into_iter().map(|d| (d.path, d.message)).collect())
}

/// Runs a scenario (dict or JSON text) and returns the report dict.
#[pyfunction]
#[pyo3(signature = (scenario, seed = None, steps = None, tol_div = None))]
fn run<'py>(
    py: Python<'py>,
    scenario: &Bound<'py, PyAny>,
    seed: Option<u64>,
    steps: Option<usize>,
    tol_div: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let s: scenario::Scenario = from_py(scenario)?;
    let s = report::apply_overrides(s, &RunOptions { seed, steps, tol_div });
    match py.detach(|| report::run(&s)) {
        Ok(out) => to_py(py, &out.report),
        Err(RunError::Invalid(ds)) => Err(PyValueError::new_err(
            ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "),
        )),
        Err(RunError::Numerical(e)) => Err(py_err(e)),
    }
}

#[pymodule]
fn qdyn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("QdynError", m.py().get_type::<QdynError>())?;
    m.add_class::<PySuperoperator>()?;
    m.add_class::<PyGenerator>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(bloch_to_state, m)?)?;
    m.add_function(wrap_pyfunction!(state_to_bloch, m)?)?;
    m.add_function(wrap_pyfunction!(trace_distance, m)?)?;
    m.add_function(wrap_pyfunction!(gksl_generator, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(template, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
