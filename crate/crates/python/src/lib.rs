//! Python bindings: states, curvature, flow runs, monitors and presets.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use bianchi_flow::config::RunConfig;
use bianchi_flow::curvature::{oracle_mismatch, scalar_curvature, sectional_curvatures};
use bianchi_flow::flow::{
    homogeneous_ode_oracle, rk4_step, time_derivatives, FlowConfig, SingularityReport, Trajectory,
};
use bianchi_flow::monitors::{run_monitors, MonitorKind, Tolerance};
use bianchi_flow::output::summary_json;
use bianchi_flow::{FlowError, MetricState as CoreState, PeriodicGrid, ScalarField};

fn to_py(e: FlowError) -> PyErr {
    match e {
        FlowError::Io(_) | FlowError::NonFinite { .. } | FlowError::StepRejected { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &text)
}

/// Flow state `(t, phi, a, b, c)` on a uniform periodic grid.
#[pyclass(name = "MetricState", module = "bianchi_flow", skip_from_py_object)]
#[derive(Clone)]
struct PyMetricState {
    inner: CoreState,
}

#[pymethods]
impl PyMetricState {
    #[new]
    #[pyo3(signature = (phi, a, b, c, t = 0.0))]
    fn new(phi: Vec<f64>, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, t: f64) -> PyResult<Self> {
        let g = PeriodicGrid::new(phi.len()).map_err(to_py)?;
        let f = |v: Vec<f64>| ScalarField::new(g, v).map_err(to_py);
        let inner = CoreState::new(t, f(phi)?, f(a)?, f(b)?, f(c)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Initial data of a named preset, e.g. "fig-a" or "sphere(2)".
    #[staticmethod]
    #[pyo3(signature = (name, n = 256))]
    fn preset(name: &str, n: usize) -> PyResult<Self> {
        let g = PeriodicGrid::new(n).map_err(to_py)?;
        let p = bianchi_flow::preset_by_name(name).map_err(to_py)?;
        Ok(Self {
            inner: p.initial_state(g).map_err(to_py)?,
        })
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.t
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.grid().n()
    }

    #[getter]
    fn z(&self) -> Vec<f64> {
        self.inner.grid().points().collect()
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.inner.phi().values().to_vec()
    }

    #[getter]
    fn a(&self) -> Vec<f64> {
        self.inner.a().values().to_vec()
    }

    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b().values().to_vec()
    }

    #[getter]
    fn c(&self) -> Vec<f64> {
        self.inner.c().values().to_vec()
    }

    /// `min(b - a, c - b)` and its index.
    fn ordering_margin(&self) -> (f64, usize) {
        self.inner.ordering_margin()
    }

    /// Sectional, Ricci and scalar curvature fields as a dict of lists.
    fn curvatures<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = sectional_curvatures(&self.inner).map_err(to_py)?;
        let d = PyDict::new(py);
        let rm = c.rm_norm();
        for (k, f) in [
            ("k01", &c.k01),
            ("k02", &c.k02),
            ("k03", &c.k03),
            ("k12", &c.k12),
            ("k13", &c.k13),
            ("k23", &c.k23),
            ("ric00", &c.ric00),
            ("ric11", &c.ric11),
            ("ric22", &c.ric22),
            ("ric33", &c.ric33),
            ("scal", &c.scal),
            ("rm_norm", &rm),
        ] {
            d.set_item(k, f.values().to_vec())?;
        }
        Ok(d)
    }

    /// Scalar curvature from its explicit formula.
    fn scalar_curvature(&self) -> PyResult<Vec<f64>> {
        Ok(scalar_curvature(&self.inner).map_err(to_py)?.into_values())
    }

    /// Max difference between closed-form and frame-symbol curvatures.
    fn oracle_mismatch(&self) -> PyResult<f64> {
        oracle_mismatch(&self.inner).map_err(to_py)
    }

    fn time_derivatives<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = time_derivatives(&self.inner).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("da_dt", r.da_dt.into_values())?;
        d.set_item("db_dt", r.db_dt.into_values())?;
        d.set_item("dc_dt", r.dc_dt.into_values())?;
        d.set_item("dlogphi_dt", r.dlogphi_dt.into_values())?;
        Ok(d)
    }

    /// One RK4 step.
    fn step(&self, dt: f64) -> PyResult<Self> {
        Ok(Self {
            inner: rk4_step(&self.inner, dt).map_err(to_py)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("MetricState(n={}, t={})", self.inner.grid().n(), self.inner.t)
    }
}

/// Result of [`evolve`].
#[pyclass(name = "Trajectory", module = "bianchi_flow", skip_from_py_object)]
struct PyTrajectory {
    traj: Trajectory,
    report: Option<SingularityReport>,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn stop_reason(&self) -> &'static str {
        self.traj.stop_reason.as_str()
    }

    #[getter]
    fn steps(&self) -> usize {
        self.traj.steps
    }

    #[getter]
    fn t_estimate(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.t_estimate)
    }

    /// Summary samples as a list of dicts.
    fn samples<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.traj.samples)
    }

    /// One summary column as a list, e.g. `column("a_min")`.
    fn column<'py>(&self, py: Python<'py>, name: &str) -> PyResult<Bound<'py, PyAny>> {
        let rows = self.samples(py)?;
        let out = pyo3::types::PyList::empty(py);
        for row in rows.try_iter()? {
            let v = row?.get_item(name).map_err(|_| {
                PyValueError::new_err(format!("unknown column '{name}'"))
            })?;
            out.append(v)?;
        }
        Ok(out.into_any())
    }

    fn singularity<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serialize(py, &self.report)
    }

    fn final_state(&self) -> Option<PyMetricState> {
        self.traj
            .final_state()
            .map(|s| PyMetricState { inner: s.clone() })
    }

    /// Runs all monitors with tolerance `kappa (dz^order + dt_mean)`.
    #[pyo3(signature = (kappa = 10.0))]
    fn monitors<'py>(&self, py: Python<'py>, kappa: f64) -> PyResult<Bound<'py, PyAny>> {
        let reports = run_monitors(
            &self.traj,
            self.report.as_ref(),
            &MonitorKind::ALL,
            Tolerance::new(kappa),
        );
        serialize(py, &reports)
    }

    fn __len__(&self) -> usize {
        self.traj.samples.len()
    }
}

/// Evolves `state` until `min a < a_min_stop` or `t_max` elapses.
#[pyfunction]
#[pyo3(signature = (state, cfl_safety = 0.2, a_min_stop = 1e-3, t_max = 100.0, monitor_stride = 1, fixed_dt = None))]
fn evolve(
    py: Python<'_>,
    state: PyRef<'_, PyMetricState>,
    cfl_safety: f64,
    a_min_stop: f64,
    t_max: f64,
    monitor_stride: usize,
    fixed_dt: Option<f64>,
) -> PyResult<PyTrajectory> {
    let cfg = FlowConfig {
        cfl_safety,
        a_min_stop,
        t_max,
        monitor_stride,
        fixed_dt,
        ..FlowConfig::default()
    };
    let s = state.inner.clone();
    let (traj, report) = py
        .detach(|| bianchi_flow::evolve(&s, &cfg))
        .map_err(to_py)?;
    Ok(PyTrajectory { traj, report })
}

/// Runs a JSON config end to end and returns the run summary.
#[pyfunction]
fn run_config<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = RunConfig::from_json(config_json).map_err(to_py)?;
    let out = py.detach(|| bianchi_flow::execute(&cfg)).map_err(to_py)?;
    json_to_py(py, &summary_json(&out).map_err(to_py)?)
}

#[pyfunction]
fn presets() -> Vec<String> {
    bianchi_flow::presets().into_iter().map(|p| p.name).collect()
}

/// `lambda0`, `d_lower`, `frak_c` and the derivative bounds for `lambda`.
#[pyfunction]
fn constants<'py>(py: Python<'py>, lambda: f64) -> PyResult<Bound<'py, PyAny>> {
    let k = bianchi_flow::monitors::constants(lambda).map_err(to_py)?;
    serialize(py, &k)
}

/// Homogeneous ODE solution: `(t, [(a, b, c)], collapsed)`.
#[pyfunction]
fn homogeneous_ode(a0: f64, b0: f64, c0: f64, t_end: f64) -> PyResult<(Vec<f64>, Vec<[f64; 3]>, bool)> {
    let s = homogeneous_ode_oracle(a0, b0, c0, t_end).map_err(to_py)?;
    Ok((s.t, s.y, s.collapsed))
}

#[pymodule]
#[pyo3(name = "bianchi_flow")]
fn bianchi_flow_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetricState>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(constants, m)?)?;
    m.add_function(wrap_pyfunction!(homogeneous_ode, m)?)?;
    Ok(())
}
