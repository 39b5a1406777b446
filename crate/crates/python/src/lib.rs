use std::path::PathBuf;

use pyo3::exceptions::{PyFileNotFoundError, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use lanewise_core as core;
use lanewise_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Config(_) | Error::SampleSize { .. } => PyValueError::new_err(e.to_string()),
        Error::MissingArtifact(_) => PyFileNotFoundError::new_err(e.to_string()),
        _ => PyIOError::new_err(e.to_string()),
    }
}

/// Tabulated q(g, mu, sigma).
#[pyclass(frozen, module = "lanewise")]
struct QTable {
    inner: core::QTable,
}

#[pymethods]
impl QTable {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core::load_table(path).map(|inner| QTable { inner }).map_err(to_py)
    }

    /// `axes` is "default" (101 x 121 x 41) or "mini" (3 x 3 x 3).
    #[staticmethod]
    #[pyo3(signature = (axes = "mini", trials = 100_000, seed = 0, sigma_values = None))]
    fn precompute(
        py: Python<'_>,
        axes: &str,
        trials: u64,
        seed: u64,
        sigma_values: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let base = match axes {
            "default" => core::GridAxes::standard(),
            "mini" => core::GridAxes::mini(),
            other => return Err(PyValueError::new_err(format!("unknown axes {other:?}"))),
        };
        let axes = match sigma_values {
            Some(s) => core::GridAxes::new(base.g().to_vec(), base.mu().to_vec(), s).map_err(to_py)?,
            None => base,
        };
        let inner = py.detach(|| core::precompute_table(&axes, trials, seed)).map_err(to_py)?;
        Ok(QTable { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        core::save_table(&self.inner, path).map_err(to_py)
    }

    fn lookup(&self, g: f64, mu: f64, sigma: f64) -> PyResult<f64> {
        let q = core::AbstractGapQuery::new(g, mu, sigma).map_err(to_py)?;
        Ok(self.inner.lookup(&q))
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        self.inner.axes().shape()
    }

    #[getter]
    fn trials_per_cell(&self) -> u64 {
        self.inner.trials_per_cell()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    /// Flat g-major list of the stored values.
    fn values(&self) -> Vec<f32> {
        self.inner.values().to_vec()
    }

    /// `(g, mu, sigma, q)` tuples with `|q - level| <= tolerance`.
    fn isosurface(&self, level: f64, tolerance: f64) -> PyResult<Vec<(f64, f64, f64, f64)>> {
        let records = core::qtable::export_isosurface_slice(&self.inner, level, tolerance).map_err(to_py)?;
        Ok(records.into_iter().map(|r| (r.g, r.mu, r.sigma, r.q)).collect())
    }

    fn __repr__(&self) -> String {
        let (a, b, c) = self.shape();
        format!("QTable(shape=({a}, {b}, {c}), trials_per_cell={}, seed={})", self.trials_per_cell(), self.seed())
    }
}

#[pyclass(module = "lanewise", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct LaneProfile {
    v: f64,
    mu: f64,
    sigma: f64,
    g_crit: f64,
    t_lc: f64,
}

impl LaneProfile {
    fn to_core(&self) -> core::LaneProfile {
        core::LaneProfile { v: self.v, mu: self.mu, sigma: self.sigma, g_crit: self.g_crit, t_lc: self.t_lc }
    }

    fn from_core(l: core::LaneProfile) -> Self {
        LaneProfile { v: l.v, mu: l.mu, sigma: l.sigma, g_crit: l.g_crit, t_lc: l.t_lc }
    }
}

#[pymethods]
impl LaneProfile {
    #[new]
    #[pyo3(signature = (v, mu = 0.0, sigma = 0.0, g_crit = 1.0, t_lc = 3.0))]
    fn new(v: f64, mu: f64, sigma: f64, g_crit: f64, t_lc: f64) -> PyResult<Self> {
        core::LaneProfile::new(v, mu, sigma, g_crit, t_lc).map(Self::from_core).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "LaneProfile(v={}, mu={}, sigma={}, g_crit={}, t_lc={})",
            self.v, self.mu, self.sigma, self.g_crit, self.t_lc
        )
    }
}

#[pyclass(frozen, module = "lanewise")]
struct Scenario {
    inner: core::Scenario,
}

#[pymethods]
impl Scenario {
    #[new]
    fn new(lanes: Vec<LaneProfile>, goal_distance: f64) -> PyResult<Self> {
        let lanes = lanes.iter().map(LaneProfile::to_core).collect();
        core::Scenario::new(lanes, goal_distance).map(|inner| Scenario { inner }).map_err(to_py)
    }

    #[getter]
    fn lanes(&self) -> Vec<LaneProfile> {
        self.inner.lanes().iter().copied().map(LaneProfile::from_core).collect()
    }

    #[getter]
    fn goal_distance(&self) -> f64 {
        self.inner.goal_distance()
    }

    fn min_maneuver_distance(&self) -> f64 {
        self.inner.min_maneuver_distance()
    }

    fn with_goal_distance(&self, goal_distance: f64) -> PyResult<Self> {
        self.inner.with_goal_distance(goal_distance).map(|inner| Scenario { inner }).map_err(to_py)
    }
}

fn quadrature(grid_step: f64, fft: bool) -> core::Quadrature {
    let mut q = core::Quadrature::with_step(grid_step);
    if fft {
        q.method = core::ConvolutionMethod::Fft;
    }
    q
}

#[pyfunction]
#[pyo3(signature = (g, mu, sigma, trials = 100_000, seed = 0))]
fn estimate_q(py: Python<'_>, g: f64, mu: f64, sigma: f64, trials: u64, seed: u64) -> PyResult<f64> {
    let q = core::AbstractGapQuery::new(g, mu, sigma).map_err(to_py)?;
    py.detach(|| core::estimate_q(q, trials, seed)).map_err(to_py)
}

#[pyfunction]
fn p_two_lane(d: f64, v1: f64, lane2: &LaneProfile, table: &QTable) -> PyResult<f64> {
    core::p_two_lane(d, v1, &lane2.to_core(), &table.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (scenario, table, grid_step = 5.0, fft = false))]
fn p_multilane(py: Python<'_>, scenario: &Scenario, table: &QTable, grid_step: f64, fft: bool) -> PyResult<f64> {
    let quad = quadrature(grid_step, fft);
    py.detach(|| core::p_multilane_with(&scenario.inner, &table.inner, &quad)).map_err(to_py)
}

/// `(distances, probabilities)` from 0 to the goal distance.
#[pyfunction]
#[pyo3(signature = (scenario, table, sample_step = 10.0, grid_step = 5.0, fft = false))]
fn profile(
    py: Python<'_>,
    scenario: &Scenario,
    table: &QTable,
    sample_step: f64,
    grid_step: f64,
    fft: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let quad = quadrature(grid_step, fft);
    let p = py
        .detach(|| core::profile_with(&scenario.inner, &table.inner, sample_step, &quad))
        .map_err(to_py)?;
    Ok((p.distances, p.probabilities))
}

#[pyfunction]
fn fit_lognormal(values: Vec<f64>) -> PyResult<(f64, f64)> {
    core::fit_lognormal(&core::HeadwaySample { values, lane_id: 0 }).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (rho_l, delta, speeds_kmh, s0 = 7.0, sigma_default = 0.8, t_lc = 3.0))]
fn profiles_from_spec(
    rho_l: f64,
    delta: f64,
    speeds_kmh: Vec<f64>,
    s0: f64,
    sigma_default: f64,
    t_lc: f64,
) -> PyResult<Vec<LaneProfile>> {
    let mut spec = core::TrafficSpec::new(rho_l, delta, speeds_kmh);
    spec.s0 = s0;
    spec.sigma_default = sigma_default;
    spec.t_lc = t_lc;
    let lanes = core::profiles_from_spec(&spec).map_err(to_py)?;
    Ok(lanes.into_iter().map(LaneProfile::from_core).collect())
}

/// Lane profiles of the highway base case with `n` lanes.
#[pyfunction]
fn base_case(n: usize) -> PyResult<Vec<LaneProfile>> {
    let lanes = core::profiles_from_spec(&core::TrafficSpec::base_case(n)).map_err(to_py)?;
    Ok(lanes.into_iter().map(LaneProfile::from_core).collect())
}

fn sim_config(
    scenario: &Scenario,
    trials: u64,
    seed: u64,
    dt: f64,
    checkpoint_interval: f64,
    jitter_kmh: Option<f64>,
) -> core::SimConfig {
    let mut c = core::SimConfig::new(scenario.inner.clone(), trials, seed);
    c.dt = dt;
    c.checkpoint_interval = checkpoint_interval;
    c.jitter_speed_kmh = jitter_kmh;
    c
}

fn report_dict<'py>(py: Python<'py>, r: &core::SimReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("checkpoints", r.checkpoints.clone())?;
    d.set_item("pass_counts", r.pass_counts.clone())?;
    d.set_item("trials", r.trials)?;
    d.set_item("probabilities", r.probabilities.clone())?;
    d.set_item("ci_halfwidths", r.ci_halfwidths.clone())?;
    Ok(d)
}

/// Microsimulation checkpoint statistics as a dict.
#[pyfunction]
#[pyo3(signature = (scenario, trials, seed = 0, dt = 0.1, checkpoint_interval = 500.0, jitter_kmh = None))]
fn run_trials<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    trials: u64,
    seed: u64,
    dt: f64,
    checkpoint_interval: f64,
    jitter_kmh: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = sim_config(scenario, trials, seed, dt, checkpoint_interval, jitter_kmh);
    let report = py.detach(|| core::run_trials(&config)).map_err(to_py)?;
    report_dict(py, &report)
}

/// Simulation against model at the checkpoints.
#[pyfunction]
#[pyo3(signature = (scenario, table, trials, seed = 0, dt = 0.1, checkpoint_interval = 500.0, jitter_kmh = None))]
#[allow(clippy::too_many_arguments)]
fn compare<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    table: &QTable,
    trials: u64,
    seed: u64,
    dt: f64,
    checkpoint_interval: f64,
    jitter_kmh: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = sim_config(scenario, trials, seed, dt, checkpoint_interval, jitter_kmh);
    let cmp = py.detach(|| core::compare_with_model(&config, &table.inner)).map_err(to_py)?;
    let d = report_dict(py, &cmp.report)?;
    d.set_item("model", cmp.model)?;
    d.set_item("abs_errors", cmp.abs_errors)?;
    d.set_item("max_abs_error", cmp.max_abs_error)?;
    d.set_item("mean_abs_error", cmp.mean_abs_error)?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "lanewise")]
fn lanewise_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<QTable>()?;
    m.add_class::<LaneProfile>()?;
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(estimate_q, m)?)?;
    m.add_function(wrap_pyfunction!(p_two_lane, m)?)?;
    m.add_function(wrap_pyfunction!(p_multilane, m)?)?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lognormal, m)?)?;
    m.add_function(wrap_pyfunction!(profiles_from_spec, m)?)?;
    m.add_function(wrap_pyfunction!(base_case, m)?)?;
    m.add_function(wrap_pyfunction!(run_trials, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
