//! Python bindings for `tripartite-core`.
//!
//! Frequencies on `Parameters` are in rad/s. `Parameters.set` and sweep
//! configs take Hz, matching the command-line tool.

use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use tripartite_core::closed::{eigenstate_qfi as core_eigenstate_qfi, EigenstateSpec};
use tripartite_core::fock::fock_oracle_qfi as core_fock_oracle_qfi;
use tripartite_core::gaussian::{gaussian_qfi, near_critical_qfi, precision_bound};
use tripartite_core::harness::sweep::default_step;
use tripartite_core::harness::{
    mode_diff as core_mode_diff, preset as core_preset, run_sweep as core_run_sweep, set_parameter,
    validate_hierarchy as core_validate_hierarchy, SweepConfig, PARAMETER_KEYS,
};
use tripartite_core::measurement::{
    error_propagation as core_error_propagation, noise_susceptibility,
    steady_anharmonic_susceptibility, MeasurementOp,
};
use tripartite_core::model::{
    phase_point as core_phase_point, squeezed_frame as core_squeezed_frame,
};
use tripartite_core::open::{lyapunov_oracle, steady_covariance};
use tripartite_core::{Error, FormulaMode, MechanicalFamily, SystemParameters};

create_exception!(tripartite, TripartiteError, PyException);
create_exception!(tripartite, ConfigError, PyValueError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config { .. } => ConfigError::new_err(e.to_string()),
        _ => TripartiteError::new_err(e.to_string()),
    }
}

fn parse_mode(mode: &str) -> PyResult<FormulaMode> {
    FormulaMode::parse(mode).ok_or_else(|| {
        ConfigError::new_err(format!("unknown mode `{mode}` (corrected or strict_paper)"))
    })
}

fn parse_op(text: &str) -> PyResult<MeasurementOp> {
    text.parse().map_err(to_py)
}

fn matrix_rows(m: &impl std::ops::Index<(usize, usize), Output = f64>) -> [[f64; 2]; 2] {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

/// System parameters in rad/s (x_b dimensionless).
#[pyclass(
    name = "Parameters",
    module = "tripartite",
    get_all,
    set_all,
    from_py_object
)]
#[derive(Clone)]
struct PyParameters {
    omega_k: f64,
    omega_m: f64,
    omega_nv: f64,
    lambda_: f64,
    g0: f64,
    omega_p: f64,
    kappa_a: f64,
    kappa_b: f64,
    kappa_sigma: f64,
    drive: f64,
    x_b: f64,
}

impl From<SystemParameters> for PyParameters {
    fn from(p: SystemParameters) -> Self {
        PyParameters {
            omega_k: p.omega_k,
            omega_m: p.omega_m,
            omega_nv: p.omega_nv,
            lambda_: p.lambda,
            g0: p.g0,
            omega_p: p.omega_p,
            kappa_a: p.kappa_a,
            kappa_b: p.kappa_b,
            kappa_sigma: p.kappa_sigma,
            drive: p.drive,
            x_b: p.x_b,
        }
    }
}

impl PyParameters {
    fn core(&self) -> SystemParameters {
        SystemParameters {
            omega_k: self.omega_k,
            omega_m: self.omega_m,
            omega_nv: self.omega_nv,
            lambda: self.lambda_,
            g0: self.g0,
            omega_p: self.omega_p,
            kappa_a: self.kappa_a,
            kappa_b: self.kappa_b,
            kappa_sigma: self.kappa_sigma,
            drive: self.drive,
            x_b: self.x_b,
        }
    }
}

#[pymethods]
impl PyParameters {
    #[new]
    #[allow(clippy::too_many_arguments)]
    #[pyo3(signature = (*, omega_k, omega_m, omega_nv, lambda_, g0, omega_p, kappa_a, kappa_b, kappa_sigma, drive, x_b))]
    fn new(
        omega_k: f64,
        omega_m: f64,
        omega_nv: f64,
        lambda_: f64,
        g0: f64,
        omega_p: f64,
        kappa_a: f64,
        kappa_b: f64,
        kappa_sigma: f64,
        drive: f64,
        x_b: f64,
    ) -> PyResult<Self> {
        let p = PyParameters {
            omega_k,
            omega_m,
            omega_nv,
            lambda_,
            g0,
            omega_p,
            kappa_a,
            kappa_b,
            kappa_sigma,
            drive,
            x_b,
        };
        p.core().validate().map_err(to_py)?;
        Ok(p)
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        core_preset(name)
            .map(Self::from)
            .ok_or_else(|| ConfigError::new_err(format!("unknown preset `{name}`")))
    }

    #[staticmethod]
    fn keys() -> Vec<&'static str> {
        PARAMETER_KEYS.to_vec()
    }

    /// Copy with one parameter replaced, `value` in Hz like the CLI `--set`.
    fn set(&self, key: &str, value: f64) -> PyResult<Self> {
        let mut p = self.core();
        set_parameter(&mut p, key, value).map_err(to_py)?;
        Ok(p.into())
    }

    fn validate(&self) -> PyResult<()> {
        self.core().validate().map_err(to_py)
    }

    #[pyo3(signature = (factor = 10.0))]
    fn hierarchy_warnings(&self, factor: f64) -> Vec<String> {
        core_validate_hierarchy(&self.core(), factor)
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.core())
    }
}

/// Squeezed-frame quantities: r, Λ (enhanced coupling) and Δ_m.
#[pyfunction]
fn squeezed_frame(p: &PyParameters) -> PyResult<BTreeMap<&'static str, f64>> {
    let f = core_squeezed_frame(&p.core()).map_err(to_py)?;
    Ok(BTreeMap::from([
        ("r", f.r),
        ("lambda_e", f.lambda_e),
        ("delta_m", f.delta_m),
    ]))
}

/// Phase classification and squeezing parameter ξ; returns (phase, values).
#[pyfunction]
fn phase_point(p: &PyParameters) -> PyResult<(&'static str, BTreeMap<&'static str, f64>)> {
    let core = p.core();
    let frame = core_squeezed_frame(&core).map_err(to_py)?;
    let pp = core_phase_point(&core, &frame);
    Ok((
        pp.phase.as_str(),
        BTreeMap::from([
            ("coupling", pp.coupling),
            ("criticality", pp.criticality),
            ("xi", pp.xi),
            ("x_minus", pp.x_minus),
            ("x_plus", pp.x_plus),
        ]),
    ))
}

fn spec(p: &SystemParameters, n: u32) -> PyResult<EigenstateSpec> {
    let frame = core_squeezed_frame(p).map_err(to_py)?;
    EigenstateSpec::new(p, frame, n).map_err(to_py)
}

/// Closed-form QFI of the n-th decoupled eigenstate.
#[pyfunction]
#[pyo3(signature = (p, n = 0))]
fn eigenstate_qfi(p: &PyParameters, n: u32) -> PyResult<f64> {
    let core = p.core();
    core_eigenstate_qfi(&spec(&core, n)?, &core).map_err(to_py)
}

/// Fidelity-based QFI in a truncated Fock basis.
#[pyfunction]
#[pyo3(signature = (p, n = 0, dim = None))]
fn fock_oracle_qfi(p: &PyParameters, n: u32, dim: Option<usize>) -> PyResult<f64> {
    let core = p.core();
    core_fock_oracle_qfi(&spec(&core, n)?, &core, dim, None).map_err(to_py)
}

/// Steady mechanical state as a function of λ around an operating point.
#[pyclass(name = "Family", module = "tripartite", frozen)]
struct PyFamily {
    params: SystemParameters,
    inner: MechanicalFamily,
}

impl PyFamily {
    fn step(&self) -> f64 {
        default_step(&self.inner)
    }
}

#[pymethods]
impl PyFamily {
    /// With `gap_ratio`, λ is solved so that Δ = gap_ratio · κ_b².
    #[new]
    #[pyo3(signature = (p, mode = "corrected", gap_ratio = None))]
    fn new(p: &PyParameters, mode: &str, gap_ratio: Option<f64>) -> PyResult<Self> {
        let mode = parse_mode(mode)?;
        let core = p.core();
        let inner = match gap_ratio {
            Some(g) => MechanicalFamily::at_gap(&core, mode, g),
            None => MechanicalFamily::new(&core, mode),
        }
        .map_err(to_py)?;
        Ok(PyFamily {
            params: inner.apply_to(&core),
            inner,
        })
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.inner.lambda()
    }

    #[getter]
    fn parameters(&self) -> PyParameters {
        self.params.into()
    }

    #[getter]
    fn gap(&self) -> f64 {
        self.inner.gap0
    }

    #[getter]
    fn omega_eff(&self) -> f64 {
        self.inner.omega_eff0
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.drift().tau
    }

    #[getter]
    fn stable(&self) -> bool {
        self.inner.drift().stable
    }

    /// (mean, covariance) of the mechanical mode at λ0 + delta.
    #[pyo3(signature = (delta = 0.0))]
    fn state(&self, delta: f64) -> PyResult<([f64; 2], [[f64; 2]; 2])> {
        let st = self.inner.state_at(delta).map_err(to_py)?;
        Ok(([st.mean[0], st.mean[1]], matrix_rows(&st.cov)))
    }

    /// Largest entrywise gap between the closed-form covariance and an
    /// independent Lyapunov solve.
    fn lyapunov_residual(&self) -> PyResult<f64> {
        let dm = self.inner.drift();
        let closed = steady_covariance(&dm).map_err(to_py)?;
        let oracle = lyapunov_oracle(&dm.v, &dm.diffusion()).map_err(to_py)?;
        Ok((closed - oracle).abs().max())
    }

    fn gaussian_qfi(&self) -> PyResult<f64> {
        let qfi = gaussian_qfi(|d| self.inner.state_at(d), self.step()).map_err(to_py)?;
        Ok(qfi.value)
    }

    fn precision_bound(&self) -> PyResult<f64> {
        precision_bound(self.gaussian_qfi()?).map_err(to_py)
    }

    /// Printed near-critical forms: {"gap_form", "tau_form"}.
    fn near_critical_qfi(&self) -> PyResult<BTreeMap<&'static str, f64>> {
        let n = near_critical_qfi(
            &self.params,
            &self.inner.frame,
            &self.inner.drift(),
            self.inner.means.mean_xa,
        )
        .map_err(to_py)?;
        Ok(BTreeMap::from([
            ("gap_form", n.gap_form),
            ("tau_form", n.tau_form),
        ]))
    }

    /// Error propagation for an operator such as `intensity` or `quadrature:0.3`.
    fn error_propagation(&self, op: &str) -> PyResult<BTreeMap<&'static str, f64>> {
        let ep = core_error_propagation(&parse_op(op)?, |d| self.inner.state_at(d), self.step())
            .map_err(to_py)?;
        Ok(BTreeMap::from([
            ("precision", ep.precision),
            ("mean", ep.mean),
            ("variance", ep.variance),
            ("slope", ep.slope),
        ]))
    }

    /// ε → 0 susceptibility of `base` to an admixture of `noise`.
    fn susceptibility(&self, base: &str, noise: &str) -> PyResult<BTreeMap<&'static str, f64>> {
        let s = noise_susceptibility(
            &parse_op(base)?,
            &parse_op(noise)?,
            |d| self.inner.state_at(d),
            self.step(),
        )
        .map_err(to_py)?;
        Ok(BTreeMap::from([
            ("value", s.value),
            ("tolerance", s.tolerance()),
            ("spread", s.spread),
            ("resolution", s.resolution),
        ]))
    }

    /// Exact susceptibility of intensity detection to ζ(b†b)².
    #[pyo3(signature = (zeta = 1.0))]
    fn anharmonic_susceptibility(&self, zeta: f64) -> PyResult<f64> {
        steady_anharmonic_susceptibility(zeta, &self.inner.drift()).map_err(to_py)
    }
}

fn parse_config(text: &str) -> PyResult<SweepConfig> {
    SweepConfig::parse(text).map_err(to_py)
}

/// Runs a sweep described in config-file syntax and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (config, jobs = 1))]
fn run_sweep(py: Python<'_>, config: &str, jobs: usize) -> PyResult<String> {
    let cfg = parse_config(config)?;
    py.detach(|| core_run_sweep(&cfg, jobs).map(|t| t.to_csv()))
        .map_err(to_py)
}

/// Columns that differ between formula modes, and those expected to.
#[pyfunction]
#[pyo3(signature = (config, jobs = 1))]
fn mode_diff(py: Python<'_>, config: &str, jobs: usize) -> PyResult<(Vec<String>, Vec<String>)> {
    let cfg = parse_config(config)?;
    let diff = py.detach(|| core_mode_diff(&cfg, jobs)).map_err(to_py)?;
    Ok((
        diff.changed.into_iter().collect(),
        diff.documented.into_iter().collect(),
    ))
}

#[pyfunction]
#[pyo3(signature = (name, factor = 10.0))]
fn validate_hierarchy(name: &str, factor: f64) -> PyResult<Vec<String>> {
    let p = core_preset(name)
        .ok_or_else(|| ConfigError::new_err(format!("unknown preset `{name}`")))?;
    Ok(core_validate_hierarchy(&p, factor))
}

#[pymodule]
fn tripartite(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("TripartiteError", py.get_type::<TripartiteError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add_class::<PyParameters>()?;
    m.add_class::<PyFamily>()?;
    m.add_function(wrap_pyfunction!(squeezed_frame, m)?)?;
    m.add_function(wrap_pyfunction!(phase_point, m)?)?;
    m.add_function(wrap_pyfunction!(eigenstate_qfi, m)?)?;
    m.add_function(wrap_pyfunction!(fock_oracle_qfi, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(mode_diff, m)?)?;
    m.add_function(wrap_pyfunction!(validate_hierarchy, m)?)?;
    Ok(())
}
