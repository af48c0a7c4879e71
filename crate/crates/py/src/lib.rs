use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use isac_beam::experiments::{
    self, beampattern_csv, run_scenario, validate_record, write_scenario_outputs, RunRecord, ScenarioRun,
};
use isac_beam::irm::IrmParams;
use isac_beam::linalg::{HermitianMatrix, C64};
use isac_beam::metrics::FeasibilityTolerances;
use isac_beam::scene::{self, build_desired_pattern, ArrayGeometry};
use isac_beam::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::AmbiguousPattern(_) | Error::DimensionMismatch(_) => {
            PyValueError::new_err(e.to_string())
        }
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(m: &HermitianMatrix) -> Vec<Vec<C64>> {
    let m = m.as_matrix();
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn params(gap_tol: Option<f64>, feas_tol: Option<f64>, max_irm_iterations: Option<usize>) -> PyResult<IrmParams> {
    let mut p = IrmParams::default();
    if let Some(v) = gap_tol {
        p.solver.gap_tol = v;
    }
    if let Some(v) = feas_tol {
        p.solver.feas_tol = v;
    }
    if let Some(v) = max_irm_iterations {
        p.max_iterations = v;
    }
    p.validate().map_err(py_err)?;
    Ok(p)
}

/// Problem instance: array, users, targets and pattern settings.
#[pyclass(name = "Scenario", module = "isac_beam", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: scene::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: scene::Scenario::from_toml_str(text).map_err(py_err)? })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: scene::Scenario::load(path).map_err(py_err)? })
    }

    #[getter]
    fn num_antennas(&self) -> usize {
        self.inner.num_antennas()
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.num_users()
    }

    #[getter]
    fn num_targets(&self) -> usize {
        self.inner.targets.len()
    }

    #[getter]
    fn user_angles(&self) -> Vec<f64> {
        self.inner.users.iter().map(|u| u.angle_deg).collect()
    }

    #[getter]
    fn target_angles(&self) -> Vec<f64> {
        self.inner.targets.iter().map(|t| t.angle_deg).collect()
    }

    fn with_antennas(&self, n: usize) -> PyResult<Self> {
        let mut s = self.inner.clone();
        s.array = s.array.with_antennas(n).map_err(py_err)?;
        Ok(Self { inner: s })
    }

    fn user_channel(&self, k: usize) -> PyResult<Vec<C64>> {
        Ok(self.inner.user_channel(k).map_err(py_err)?.iter().copied().collect())
    }

    /// `(angle_deg, lower, upper)` for every constrained grid angle.
    fn desired_pattern(&self) -> PyResult<Vec<(f64, f64, f64)>> {
        let p = build_desired_pattern(&self.inner).map_err(py_err)?;
        Ok(p.samples().iter().map(|s| (s.angle_deg, s.lower(), s.upper())).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(antennas={}, users={:?}, targets={:?})",
            self.inner.num_antennas(),
            self.user_angles(),
            self.target_angles()
        )
    }
}

/// Outcome of one relaxation plus rank-reduction run.
#[pyclass(name = "Run", module = "isac_beam", frozen)]
struct PyRun {
    inner: ScenarioRun,
}

#[pymethods]
impl PyRun {
    #[getter]
    fn converged(&self) -> bool {
        self.inner.result.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.result.iterations
    }

    #[getter]
    fn sdr_power_mw(&self) -> f64 {
        self.inner.result.sdr_power
    }

    #[getter]
    fn power_mw(&self) -> f64 {
        self.inner.result.final_power
    }

    #[getter]
    fn power_dbm(&self) -> Option<f64> {
        self.inner.record.power_dbm()
    }

    #[getter]
    fn sinrs(&self) -> Vec<f64> {
        self.inner.record.sinrs.clone()
    }

    #[getter]
    fn rates(&self) -> Vec<f64> {
        self.inner.record.rates.clone()
    }

    #[getter]
    fn rank_one_ratios(&self) -> Vec<f64> {
        self.inner.result.rank_one_ratios.clone()
    }

    #[getter]
    fn message(&self) -> String {
        self.inner.result.message.clone()
    }

    /// One vector per user, or `None` if the covariances are not rank one.
    #[getter]
    fn beamformers(&self) -> Option<Vec<Vec<C64>>> {
        self.inner.result.set.vectors().map(|vs| vs.iter().map(|v| v.iter().copied().collect()).collect())
    }

    #[getter]
    fn covariances(&self) -> Vec<Vec<Vec<C64>>> {
        self.inner.result.set.covariances().iter().map(rows).collect()
    }

    #[getter]
    fn radar_covariance(&self) -> Vec<Vec<C64>> {
        rows(self.inner.result.set.radar_covariance())
    }

    /// `(iter, phi, r, power_mw)` per penalized solve.
    #[getter]
    fn trace(&self) -> Vec<(usize, f64, f64, f64)> {
        self.inner.result.trace.iter().map(|t| (t.iter, t.phi, t.r, t.power_mw)).collect()
    }

    fn record_json(&self) -> PyResult<String> {
        self.inner.record.to_json().map_err(py_err)
    }

    fn beampattern_csv(&self) -> PyResult<String> {
        beampattern_csv(&self.inner.result.set, &self.inner.scenario).map_err(py_err)
    }

    #[pyo3(signature = (directory, stem = "solution"))]
    fn save(&self, directory: PathBuf, stem: &str) -> PyResult<PathBuf> {
        Ok(write_scenario_outputs(&self.inner, &directory, stem).map_err(py_err)?.record)
    }

    /// Re-check every constraint; returns `(passed, report)`.
    fn validate(&self) -> PyResult<(bool, String)> {
        let r = validate_record(&self.inner.record, &FeasibilityTolerances::default()).map_err(py_err)?;
        Ok((r.passed(), r.render()))
    }
}

#[pyfunction]
#[pyo3(signature = (scenario, gap_tol = None, feas_tol = None, max_irm_iterations = None))]
fn solve(
    py: Python<'_>,
    scenario: &PyScenario,
    gap_tol: Option<f64>,
    feas_tol: Option<f64>,
    max_irm_iterations: Option<usize>,
) -> PyResult<PyRun> {
    let p = params(gap_tol, feas_tol, max_irm_iterations)?;
    let s = scenario.inner.clone();
    let run = py.detach(move || run_scenario(&s, &p)).map_err(py_err)?;
    Ok(PyRun { inner: run })
}

/// `(N, power_dBm or None, iterations)` per array size.
#[pyfunction]
#[pyo3(signature = (scenario, antennas, workers = 1))]
fn sweep_antennas(
    py: Python<'_>,
    scenario: &PyScenario,
    antennas: Vec<usize>,
    workers: usize,
) -> PyResult<Vec<(usize, Option<f64>, usize)>> {
    let p = IrmParams::default();
    let s = scenario.inner.clone();
    let sweep = py.detach(move || experiments::sweep_antennas(&s, &antennas, &p, workers)).map_err(py_err)?;
    Ok(sweep
        .antennas
        .iter()
        .zip(&sweep.outcomes)
        .map(|(&n, o)| (n, o.power_dbm(), o.record().map_or(0, |r| r.summary.iterations)))
        .collect())
}

#[pyfunction]
fn rate(sinr: f64) -> f64 {
    isac_beam::metrics::rate(sinr)
}

/// Half-wavelength ULA steering vector.
#[pyfunction]
fn steering_vector(num_antennas: usize, carrier_frequency: f64, angle_deg: f64) -> PyResult<Vec<C64>> {
    let array = ArrayGeometry::half_wavelength(num_antennas, carrier_frequency).map_err(py_err)?;
    Ok(scene::steering_vector(&array, angle_deg).map_err(py_err)?.iter().copied().collect())
}

/// Validate a saved run record; returns `(passed, report)`.
#[pyfunction]
fn validate_record_file(path: PathBuf) -> PyResult<(bool, String)> {
    let record = RunRecord::load(&path).map_err(py_err)?;
    let r = validate_record(&record, &FeasibilityTolerances::default()).map_err(py_err)?;
    Ok((r.passed(), r.render()))
}

#[pymodule]
#[pyo3(name = "isac_beam")]
pub fn isac_beam_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyRun>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_antennas, m)?)?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(steering_vector, m)?)?;
    m.add_function(wrap_pyfunction!(validate_record_file, m)?)?;
    Ok(())
}
