//! Python bindings for `open_majorana`.
//!
//! Matrices cross the boundary as lists of rows of Python `complex`; wrap
//! them with `numpy.array` on the Python side.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use open_majorana::dissipator::{self as diss, Coupling};
use open_majorana::experiments as exp;
use open_majorana::factorization as fact;
use open_majorana::integrator::{self as integ, Method, Picture};
use open_majorana::linalg::ComplexMatrix;
use open_majorana::model;
use open_majorana::spin::{self, Component};

type Rows = Vec<Vec<Complex64>>;

fn err(e: open_majorana::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_matrix(rows: &Rows) -> PyResult<ComplexMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("expected a non-empty square matrix"));
    }
    Ok(ComplexMatrix::from_rows(rows))
}

#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: model::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (omega_rabi = 1.0, kappa = 0.1, t0 = 250.0, j = 0.5))]
    fn new(omega_rabi: f64, kappa: f64, t0: f64, j: f64) -> PyResult<Self> {
        let inner = model::ModelParams { omega_rabi, kappa, t0, j };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn omega_rabi(&self) -> f64 {
        self.inner.omega_rabi
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn t0(&self) -> f64 {
        self.inner.t0
    }

    #[getter]
    fn j(&self) -> f64 {
        self.inner.j
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!("ModelParams(omega_rabi={}, kappa={}, t0={}, j={})", p.omega_rabi, p.kappa, p.t0, p.j)
    }
}

#[pyclass(name = "NoiseConfig", from_py_object)]
#[derive(Clone)]
struct PyNoiseConfig {
    inner: diss::NoiseConfig,
}

#[pymethods]
impl PyNoiseConfig {
    /// `channel` is "Jz", "Jx" or a Hermitian matrix (list of rows).
    #[new]
    #[pyo3(signature = (channel = None, gamma = 0.0, temperature = 0.001, include_nu_zero = false, nu_zero_rate = 0.0))]
    fn new(
        channel: Option<&Bound<'_, PyAny>>,
        gamma: f64,
        temperature: f64,
        include_nu_zero: bool,
        nu_zero_rate: f64,
    ) -> PyResult<Self> {
        let coupling = match channel {
            None => Coupling::Jz,
            Some(c) => match c.extract::<String>() {
                Ok(tag) => tag.parse().map_err(err)?,
                Err(_) => Coupling::Custom(to_matrix(&c.extract::<Rows>()?)?),
            },
        };
        let inner = diss::NoiseConfig {
            coupling,
            gamma_flat: gamma,
            temperature,
            include_nu_zero,
            nu_zero_rate,
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn channel(&self) -> &'static str {
        self.inner.coupling.tag()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma_flat
    }

    #[getter]
    fn temperature(&self) -> f64 {
        self.inner.temperature
    }

    fn __repr__(&self) -> String {
        format!(
            "NoiseConfig(channel={:?}, gamma={}, temperature={})",
            self.inner.coupling.tag(),
            self.inner.gamma_flat,
            self.inner.temperature
        )
    }
}

#[pyclass(name = "IntegratorConfig", from_py_object)]
#[derive(Clone, Copy)]
struct PyIntegratorConfig {
    inner: integ::IntegratorConfig,
}

#[pymethods]
impl PyIntegratorConfig {
    #[new]
    #[pyo3(signature = (method = "rk4_doubling", picture = "adiabatic", dt = 0.01, rel_tol = 1e-8, unitary_rel_tol = 1e-10, max_steps = 20_000_000, validity_tol = 1e-7))]
    fn new(
        method: &str,
        picture: &str,
        dt: f64,
        rel_tol: f64,
        unitary_rel_tol: f64,
        max_steps: usize,
        validity_tol: f64,
    ) -> PyResult<Self> {
        let method = match method {
            "rk4_doubling" => Method::Rk4Doubling,
            "rk4_fixed" => Method::Rk4Fixed,
            other => return Err(PyValueError::new_err(format!("unknown method '{other}'"))),
        };
        let picture = match picture {
            "adiabatic" => Picture::Adiabatic,
            "lab" => Picture::Lab,
            other => return Err(PyValueError::new_err(format!("unknown picture '{other}'"))),
        };
        let inner = integ::IntegratorConfig {
            method,
            picture,
            dt,
            rel_tol,
            unitary_rel_tol,
            max_steps,
            validity_tol,
            ..integ::IntegratorConfig::default()
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn rel_tol(&self) -> f64 {
        self.inner.rel_tol
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }
}

#[pyclass(name = "ResultRecord", get_all, frozen, skip_from_py_object)]
struct PyResultRecord {
    j: f64,
    gamma: f64,
    temperature: f64,
    channel: String,
    efficiency: f64,
    trace_drift: f64,
    hermiticity_drift: f64,
    min_eigenvalue: f64,
    failed: bool,
    failure: Option<String>,
    steps: usize,
    wall_time_s: f64,
}

#[pymethods]
impl PyResultRecord {
    fn __repr__(&self) -> String {
        format!(
            "ResultRecord(j={}, channel={:?}, gamma={}, temperature={}, efficiency={}, failed={})",
            self.j, self.channel, self.gamma, self.temperature, self.efficiency, self.failed
        )
    }
}

impl From<exp::ResultRecord> for PyResultRecord {
    fn from(r: exp::ResultRecord) -> Self {
        Self {
            j: r.j,
            gamma: r.gamma,
            temperature: r.temperature,
            channel: r.channel,
            efficiency: r.efficiency,
            trace_drift: r.trace_drift,
            hermiticity_drift: r.hermiticity_drift,
            min_eigenvalue: r.min_eigenvalue,
            failed: r.failed,
            failure: r.failure,
            steps: r.steps,
            wall_time_s: r.wall_time_s,
        }
    }
}

fn params_or_default(p: Option<PyModelParams>) -> model::ModelParams {
    p.map(|p| p.inner).unwrap_or_default()
}

fn integrator_or_default(c: Option<PyIntegratorConfig>) -> integ::IntegratorConfig {
    c.map(|c| c.inner).unwrap_or_default()
}

/// Jx, Jy, Jz, J+ and J- of a spin-j, in the basis of descending m.
#[pyfunction]
fn spin_operators<'py>(py: Python<'py>, j: f64) -> PyResult<Bound<'py, PyDict>> {
    let s = spin::build_spin(j).map_err(err)?;
    let d = PyDict::new(py);
    for (k, m) in [("jx", &s.jx), ("jy", &s.jy), ("jz", &s.jz), ("jplus", &s.jplus), ("jminus", &s.jminus)] {
        d.set_item(k, m.to_rows())?;
    }
    Ok(d)
}

/// `exp(i theta Jy)` for a spin-j.
#[pyfunction]
fn rotation_y(j: f64, theta: f64) -> PyResult<Rows> {
    let s = spin::build_spin(j).map_err(err)?;
    Ok(spin::rotation_y(&s, theta).map_err(err)?.to_rows())
}

/// `H(t) = kappa t Jz + Omega sqrt(2) Jx` for `params.j`.
#[pyfunction]
#[pyo3(signature = (t, params = None))]
fn hamiltonian(t: f64, params: Option<PyModelParams>) -> PyResult<Rows> {
    let p = params_or_default(params);
    let s = spin::build_spin(p.j).map_err(err)?;
    Ok(model::hamiltonian(t, &p, &s).map_err(err)?.to_rows())
}

#[pyfunction]
fn bose_occupation(nu_bar: f64, temperature: f64) -> PyResult<f64> {
    diss::bose_occupation(nu_bar, temperature).map_err(err)
}

/// Rate of band `nu` at gap `omega_gap`.
#[pyfunction]
fn rates(nu: i32, omega_gap: f64, noise: PyNoiseConfig) -> PyResult<f64> {
    diss::rates(nu, omega_gap, &noise.inner).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (j, noise = None, params = None, integrator = None))]
fn transfer_efficiency(
    py: Python<'_>,
    j: f64,
    noise: Option<PyNoiseConfig>,
    params: Option<PyModelParams>,
    integrator: Option<PyIntegratorConfig>,
) -> PyResult<PyResultRecord> {
    let noise = noise.map(|n| n.inner).unwrap_or_else(diss::NoiseConfig::noiseless);
    let p = params_or_default(params);
    let cfg = integrator_or_default(integrator);
    let rec = py
        .detach(|| exp::transfer_efficiency(j, &noise, &p, &cfg))
        .map_err(err)?;
    Ok(rec.into())
}

/// Efficiency on the grid j x channel x T x gamma, in that nesting order.
#[pyfunction]
#[pyo3(signature = (j_list, gamma_grid, channels, temperatures, params = None, integrator = None, workers = None, output = None, timing = true))]
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    py: Python<'_>,
    j_list: Vec<f64>,
    gamma_grid: Vec<f64>,
    channels: Vec<String>,
    temperatures: Vec<f64>,
    params: Option<PyModelParams>,
    integrator: Option<PyIntegratorConfig>,
    workers: Option<usize>,
    output: Option<std::path::PathBuf>,
    timing: bool,
) -> PyResult<Vec<PyResultRecord>> {
    let channels = channels
        .iter()
        .map(|c| c.parse::<Coupling>())
        .collect::<open_majorana::Result<Vec<_>>>()
        .map_err(err)?;
    let spec = exp::SweepSpec {
        j_list,
        gamma_grid,
        channels,
        temperatures,
        model: params_or_default(params),
        integrator: integrator_or_default(integrator),
    };
    let opts = exp::SweepOptions { workers, timing };
    let recs = py
        .detach(|| exp::run_sweep(&spec, output.as_deref(), opts))
        .map_err(err)?;
    Ok(recs.into_iter().map(Into::into).collect())
}

/// `||U_j - V^dag u^(x)2j V||_F` over the full window.
#[pyfunction]
#[pyo3(signature = (j, params = None, integrator = None))]
fn unitary_factorization_check(
    py: Python<'_>,
    j: f64,
    params: Option<PyModelParams>,
    integrator: Option<PyIntegratorConfig>,
) -> PyResult<f64> {
    let p = params_or_default(params);
    let cfg = integrator_or_default(integrator);
    py.detach(|| fact::unitary_factorization_check(j, &p, &cfg)).map_err(err)
}

/// Trace distance between the spin-j and the 2j-qubit open evolutions.
#[pyfunction]
#[pyo3(signature = (j, noise, params = None, integrator = None))]
fn lindblad_factorization_residual(
    py: Python<'_>,
    j: f64,
    noise: PyNoiseConfig,
    params: Option<PyModelParams>,
    integrator: Option<PyIntegratorConfig>,
) -> PyResult<f64> {
    let p = params_or_default(params);
    let cfg = integrator_or_default(integrator);
    py.detach(|| fact::lindblad_factorization_residual(j, &noise.inner, &p, &cfg))
        .map_err(err)
}

/// `D[A1 + A2](rho) - D[A1](rho) - D[A2](rho)`.
#[pyfunction]
fn dissipator_identity_gap(a1: Rows, a2: Rows, rho: Rows) -> PyResult<Rows> {
    let gap = fact::dissipator_identity_gap(&to_matrix(&a1)?, &to_matrix(&a2)?, &to_matrix(&rho)?)
        .map_err(err)?;
    Ok(gap.to_rows())
}

/// Monte Carlo shared-noise ensemble against the second-order cross term.
#[pyfunction]
#[pyo3(signature = (params = None, n_spins = 2, component = "z", alpha = 0.05, n_traj = 10_000, seed = 1, dt = 0.02, t_start = -10.0, t_end = 10.0, workers = None))]
#[allow(clippy::too_many_arguments)]
fn classical_noise_ensemble<'py>(
    py: Python<'py>,
    params: Option<PyModelParams>,
    n_spins: usize,
    component: &str,
    alpha: f64,
    n_traj: usize,
    seed: u64,
    dt: f64,
    t_start: f64,
    t_end: f64,
    workers: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let nc = fact::ClassicalNoiseConfig {
        n_spins,
        component: component.parse::<Component>().map_err(err)?,
        alpha,
        n_traj,
        seed,
        dt,
        span: (t_start, t_end),
        workers,
        ..fact::ClassicalNoiseConfig::default()
    };
    let p = params_or_default(params);
    let cfg = integ::IntegratorConfig::default();
    let rep = py
        .detach(|| fact::classical_noise_ensemble(&p, &nc, &cfg))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("mc_difference", rep.mc_difference.to_rows())?;
    d.set_item("analytic_cross_term", rep.analytic_cross_term.to_rows())?;
    d.set_item("entry_standard_error", rep.entry_standard_error.clone())?;
    d.set_item("statistical_error", rep.statistical_error)?;
    d.set_item("deviation", rep.deviation())?;
    d.set_item("max_entry_z_score", rep.max_entry_z_score())?;
    d.set_item("warnings", rep.warnings.clone())?;
    Ok(d)
}

#[pymodule]
fn open_majorana_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyNoiseConfig>()?;
    m.add_class::<PyIntegratorConfig>()?;
    m.add_class::<PyResultRecord>()?;
    m.add_function(wrap_pyfunction!(spin_operators, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_y, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(bose_occupation, m)?)?;
    m.add_function(wrap_pyfunction!(rates, m)?)?;
    m.add_function(wrap_pyfunction!(transfer_efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(unitary_factorization_check, m)?)?;
    m.add_function(wrap_pyfunction!(lindblad_factorization_residual, m)?)?;
    m.add_function(wrap_pyfunction!(dissipator_identity_gap, m)?)?;
    m.add_function(wrap_pyfunction!(classical_noise_ensemble, m)?)?;
    Ok(())
}
