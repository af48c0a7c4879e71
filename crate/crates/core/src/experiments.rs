//! Scenario runs, parameter sweeps and their file outputs.
//!
//! Every run produces a [`RunRecord`] (JSON) from which its summary rows can
//! be regenerated. Tables are CSV with nine significant digits and LF line
//! endings; all files are written atomically.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulation::RelaxedSpec;
use crate::io::write_atomic;
use crate::irm::{run_irm_spec, write_trace_csv, IrmParams, IrmResult, IterationRecord};
use crate::linalg::{CMatrix, CVector, HermitianMatrix, C64};
use crate::metrics::{
    beam_matching_error, check_constraints, component_decomposition, format_dbm, format_sig9, plot_grid, rate, sinr,
    BeamformerSet, ConstraintCheck, FeasibilityTolerances,
};
use crate::scene::{build_desired_pattern, Scenario, ScenarioConfig, TargetSpec, UserSpec};
use crate::sdp::SolverReport;
use crate::units::mw_to_dbm;

pub const BEAMPATTERN_HEADER: &str = "angle_deg,total_dBm,comm_dBm,radar_dBm";
pub const ANTENNA_SWEEP_HEADER: &str = "N,power_dBm,iters";
pub const DISTANCE_SWEEP_HEADER: &str = "swept_entity,distance_m,delta_deg,power_dBm";
pub const ANGLE_SETS_HEADER: &str = "set,users_deg,targets_deg,power_dBm,iters";

/// Complex matrix as rows of `[re, im]` pairs.
pub type MatrixData = Vec<Vec<[f64; 2]>>;
/// Complex vector as `[re, im]` pairs.
pub type VectorData = Vec<[f64; 2]>;

pub fn matrix_to_data(m: &CMatrix) -> MatrixData {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

pub fn matrix_from_data(d: &MatrixData) -> Result<CMatrix> {
    let rows = d.len();
    let cols = d.first().map_or(0, Vec::len);
    if d.iter().any(|r| r.len() != cols) {
        return Err(Error::dims("ragged matrix rows"));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| C64::new(d[i][j][0], d[i][j][1])))
}

pub fn vector_to_data(v: &CVector) -> VectorData {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn vector_from_data(d: &VectorData) -> CVector {
    CVector::from_iterator(d.len(), d.iter().map(|z| C64::new(z[0], z[1])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionData {
    pub covariances: Vec<MatrixData>,
    pub radar_covariance: MatrixData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<VectorData>>,
}

impl SolutionData {
    pub fn from_set(set: &BeamformerSet) -> Self {
        Self {
            covariances: set.covariances().iter().map(|w| matrix_to_data(w.as_matrix())).collect(),
            radar_covariance: matrix_to_data(set.radar_covariance().as_matrix()),
            vectors: set.vectors().map(|vs| vs.iter().map(vector_to_data).collect()),
        }
    }

    /// Rebuilds the set. Extracted vectors, when present, define the user
    /// covariances.
    pub fn to_set(&self) -> Result<BeamformerSet> {
        let rd = HermitianMatrix::new(matrix_from_data(&self.radar_covariance)?)?;
        match &self.vectors {
            Some(vs) => BeamformerSet::from_vectors(vs.iter().map(vector_from_data).collect(), rd),
            None => {
                let ws = self
                    .covariances
                    .iter()
                    .map(|m| HermitianMatrix::new(matrix_from_data(m)?))
                    .collect::<Result<_>>()?;
                BeamformerSet::new(ws, rd)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrmSummary {
    pub converged: bool,
    pub iterations: usize,
    pub sdr_power_mw: f64,
    pub final_power_mw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_r: Option<f64>,
    pub rank_one_ratios: Vec<f64>,
    pub message: String,
}

/// Everything known about one solved scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: ScenarioConfig,
    pub params: IrmParams,
    pub summary: IrmSummary,
    pub sinrs: Vec<f64>,
    pub rates: Vec<f64>,
    pub beam_matching_error: f64,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub solver_reports: Vec<SolverReport>,
    pub trace: Vec<IterationRecord>,
    pub solution: SolutionData,
    pub relaxation: SolutionData,
}

impl RunRecord {
    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::from_config(&self.scenario)
    }

    /// Final power in dBm, or `None` when the run did not converge.
    pub fn power_dbm(&self) -> Option<f64> {
        if self.summary.converged {
            mw_to_dbm(self.summary.final_power_mw)
        } else {
            None
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("run record: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// A solved scenario together with its record.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub result: IrmResult,
    pub record: RunRecord,
}

pub fn run_scenario(scenario: &Scenario, params: &IrmParams) -> Result<ScenarioRun> {
    let started = unix_now();
    let pattern = build_desired_pattern(scenario)?;
    let spec = RelaxedSpec::from_scenario(scenario, &pattern, &params.formulation)?;
    let result = run_irm_spec(&spec, params)?;
    let sinrs = (0..scenario.num_users()).map(|k| sinr(&result.set, k, scenario)).collect::<Result<Vec<_>>>()?;
    let record = RunRecord {
        scenario: scenario.to_config(),
        params: params.clone(),
        summary: IrmSummary {
            converged: result.converged,
            iterations: result.iterations,
            sdr_power_mw: result.sdr_power,
            final_power_mw: result.final_power,
            final_r: result.final_r.is_finite().then_some(result.final_r),
            rank_one_ratios: result.rank_one_ratios.clone(),
            message: result.message.clone(),
        },
        rates: sinrs.iter().map(|&g| rate(g)).collect(),
        sinrs,
        beam_matching_error: beam_matching_error(&result.set, &pattern, &scenario.array)?,
        started_unix_s: started,
        finished_unix_s: unix_now(),
        solver_reports: result.solver_reports.clone(),
        trace: result.trace.clone(),
        solution: SolutionData::from_set(&result.set),
        relaxation: SolutionData::from_set(&result.sdr_set),
    };
    Ok(ScenarioRun { scenario: scenario.clone(), result, record })
}

/// Beampattern table on the 181-point grid.
pub fn beampattern_csv(set: &BeamformerSet, scenario: &Scenario) -> Result<String> {
    let curves = component_decomposition(set, &scenario.array, &plot_grid())?;
    let mut out = String::from(BEAMPATTERN_HEADER);
    out.push('\n');
    for i in 0..curves.angles_deg.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            curves.angles_deg[i],
            format_dbm(curves.total[i]),
            format_dbm(curves.communication[i]),
            format_dbm(curves.radar[i])
        ));
    }
    Ok(out)
}

/// Files written for a single scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioOutputs {
    pub record: PathBuf,
    pub beampattern: PathBuf,
    pub sdr_beampattern: PathBuf,
    pub trace: PathBuf,
}

/// Writes `<stem>.json`, `<stem>_beampattern.csv`, `<stem>_sdr_beampattern.csv`
/// and `<stem>_trace.csv` under `dir`.
pub fn write_scenario_outputs(run: &ScenarioRun, dir: &Path, stem: &str) -> Result<ScenarioOutputs> {
    let out = ScenarioOutputs {
        record: dir.join(format!("{stem}.json")),
        beampattern: dir.join(format!("{stem}_beampattern.csv")),
        sdr_beampattern: dir.join(format!("{stem}_sdr_beampattern.csv")),
        trace: dir.join(format!("{stem}_trace.csv")),
    };
    // Render everything before touching the disk.
    let bp = beampattern_csv(&run.result.set, &run.scenario)?;
    let sdr = beampattern_csv(&run.result.sdr_set, &run.scenario)?;
    let json = run.record.to_json()?;
    write_atomic(&out.beampattern, bp.as_bytes())?;
    write_atomic(&out.sdr_beampattern, sdr.as_bytes())?;
    write_trace_csv(&run.result.trace, &out.trace)?;
    write_atomic(&out.record, json.as_bytes())?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Single,
    AntennaSweep,
    DistanceSweep,
    AngleSets,
    Decomposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSet {
    pub name: String,
    pub users_deg: Vec<f64>,
    pub targets_deg: Vec<f64>,
}

/// Experiment file. `scenario` is resolved relative to the experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub scenario: PathBuf,
    #[serde(default)]
    pub antennas: Vec<usize>,
    #[serde(default)]
    pub distances_m: Vec<f64>,
    #[serde(default)]
    pub beam_widths_deg: Vec<f64>,
    /// Distance of the entity held still in a distance sweep.
    #[serde(default = "default_fixed_distance")]
    pub fixed_distance_m: f64,
    #[serde(default)]
    pub angle_sets: Vec<AngleSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_fixed_distance() -> f64 {
    10.0
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("{:?} experiment needs a nonempty {what}", self.kind)))
            }
        };
        match self.kind {
            ExperimentKind::Single | ExperimentKind::Decomposition => Ok(()),
            ExperimentKind::AntennaSweep => {
                need(!self.antennas.is_empty(), "antennas list")?;
                if self.antennas.iter().any(|&n| n < 2) {
                    return Err(Error::Config("antenna counts must be at least 2".into()));
                }
                Ok(())
            }
            ExperimentKind::DistanceSweep => {
                need(!self.distances_m.is_empty(), "distances_m list")?;
                need(!self.beam_widths_deg.is_empty(), "beam_widths_deg list")?;
                if self.distances_m.iter().chain([&self.fixed_distance_m]).any(|d| !(*d > 0.0 && d.is_finite())) {
                    return Err(Error::Config("distances must be positive".into()));
                }
                if self.beam_widths_deg.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                    return Err(Error::Config("beam widths must be nonnegative".into()));
                }
                Ok(())
            }
            ExperimentKind::AngleSets => {
                need(!self.angle_sets.is_empty(), "angle_sets list")?;
                for s in &self.angle_sets {
                    if s.users_deg.is_empty() || s.targets_deg.is_empty() {
                        return Err(Error::Config(format!("angle set {} needs users and targets", s.name)));
                    }
                    if s.name.is_empty() || s.name.contains(|c: char| c == ',' || c == '/' || c.is_whitespace()) {
                        return Err(Error::Config(format!("angle set name {:?} is not a plain token", s.name)));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Loads the experiment and its base scenario.
    pub fn load(path: &Path) -> Result<(Self, Scenario)> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let spec = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("")).join(&spec.scenario);
        let scenario = Scenario::load(&base)?;
        Ok((spec, scenario))
    }
}

/// Outcome of one run inside a sweep.
#[derive(Debug, Clone)]
pub enum SweepOutcome {
    Solved(Box<RunRecord>),
    Failed(String),
}

impl SweepOutcome {
    pub fn record(&self) -> Option<&RunRecord> {
        match self {
            Self::Solved(r) => Some(r),
            Self::Failed(_) => None,
        }
    }

    pub fn power_dbm(&self) -> Option<f64> {
        self.record().and_then(RunRecord::power_dbm)
    }

    fn power_cell(&self) -> String {
        self.power_dbm().map_or_else(|| "nan".to_string(), format_sig9)
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::NumericalFailure(format!("thread pool: {e}")))
}

/// Runs independent scenarios on up to `workers` threads, keeping input order.
pub fn run_batch(scenarios: &[Scenario], params: &IrmParams, workers: usize) -> Result<Vec<SweepOutcome>> {
    let pool = pool(workers)?;
    Ok(pool.install(|| {
        scenarios
            .par_iter()
            .map(|s| match run_scenario(s, params) {
                Ok(run) => SweepOutcome::Solved(Box::new(run.record)),
                Err(e) => SweepOutcome::Failed(e.to_string()),
            })
            .collect()
    }))
}

fn save_outcomes(dir: &Path, stems: &[String], outcomes: &[SweepOutcome]) -> Result<()> {
    for (stem, o) in stems.iter().zip(outcomes) {
        match o {
            SweepOutcome::Solved(r) => r.save(&dir.join(format!("{stem}.json")))?,
            SweepOutcome::Failed(msg) => {
                write_atomic(&dir.join(format!("{stem}.error.txt")), format!("{msg}\n").as_bytes())?
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AntennaSweep {
    pub antennas: Vec<usize>,
    pub outcomes: Vec<SweepOutcome>,
}

impl AntennaSweep {
    pub fn csv(&self) -> String {
        let mut out = format!("{ANTENNA_SWEEP_HEADER}\n");
        for (n, o) in self.antennas.iter().zip(&self.outcomes) {
            let iters = o.record().map_or(0, |r| r.summary.iterations);
            out.push_str(&format!("{n},{},{iters}\n", o.power_cell()));
        }
        out
    }
}

pub fn sweep_antennas(base: &Scenario, antennas: &[usize], params: &IrmParams, workers: usize) -> Result<AntennaSweep> {
    if antennas.is_empty() {
        return Err(Error::invalid("antenna sweep needs at least one array size"));
    }
    let scenarios = antennas
        .iter()
        .map(|&n| {
            let mut s = base.clone();
            s.array = base.array.with_antennas(n)?;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AntennaSweep { antennas: antennas.to_vec(), outcomes: run_batch(&scenarios, params, workers)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptEntity {
    User,
    Target,
}

impl SweptEntity {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::User => "user",
            Self::Target => "target",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistancePoint {
    pub entity: SweptEntity,
    pub distance_m: f64,
    pub delta_deg: f64,
}

#[derive(Debug, Clone)]
pub struct DistanceSweep {
    pub points: Vec<DistancePoint>,
    pub outcomes: Vec<SweepOutcome>,
}

impl DistanceSweep {
    pub fn csv(&self) -> String {
        let mut out = format!("{DISTANCE_SWEEP_HEADER}\n");
        for (p, o) in self.points.iter().zip(&self.outcomes) {
            out.push_str(&format!("{},{},{},{}\n", p.entity.as_str(), p.distance_m, p.delta_deg, o.power_cell()));
        }
        out
    }

    /// Powers of one curve in sweep order.
    pub fn curve(&self, entity: SweptEntity, delta_deg: f64) -> Vec<(f64, Option<f64>)> {
        self.points
            .iter()
            .zip(&self.outcomes)
            .filter(|(p, _)| p.entity == entity && p.delta_deg == delta_deg)
            .map(|(p, o)| (p.distance_m, o.power_dbm()))
            .collect()
    }
}

/// Moves every user (or every target) to each distance while the other
/// entities sit at `fixed_distance_m`, for each beam width.
pub fn sweep_distance(
    base: &Scenario,
    distances_m: &[f64],
    beam_widths_deg: &[f64],
    fixed_distance_m: f64,
    params: &IrmParams,
    workers: usize,
) -> Result<DistanceSweep> {
    if distances_m.is_empty() || beam_widths_deg.is_empty() {
        return Err(Error::invalid("distance sweep needs distances and beam widths"));
    }
    let mut points = Vec::new();
    let mut scenarios = Vec::new();
    for entity in [SweptEntity::User, SweptEntity::Target] {
        for &delta in beam_widths_deg {
            for &d in distances_m {
                let mut s = base.clone();
                s.beam_width_deg = delta;
                let (user_d, target_d) = match entity {
                    SweptEntity::User => (d, fixed_distance_m),
                    SweptEntity::Target => (fixed_distance_m, d),
                };
                s.users.iter_mut().for_each(|u| u.distance_m = user_d);
                s.targets.iter_mut().for_each(|t| t.distance_m = target_d);
                s.validate()?;
                scenarios.push(s);
                points.push(DistancePoint { entity, distance_m: d, delta_deg: delta });
            }
        }
    }
    Ok(DistanceSweep { points, outcomes: run_batch(&scenarios, params, workers)? })
}

/// Base scenario with users and targets moved to the given angles. The
/// first user and target of the base act as templates for the rest.
pub fn scenario_with_angles(base: &Scenario, users_deg: &[f64], targets_deg: &[f64]) -> Result<Scenario> {
    let (Some(u0), Some(t0)) = (base.users.first(), base.targets.first()) else {
        return Err(Error::invalid("base scenario has no user or target template"));
    };
    let mut s = base.clone();
    s.users = users_deg.iter().map(|&a| UserSpec { angle_deg: a, ..u0.clone() }).collect();
    s.targets = targets_deg.iter().map(|&a| TargetSpec { angle_deg: a, ..t0.clone() }).collect();
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct AngleSetRun {
    pub set: AngleSet,
    pub outcome: SweepOutcome,
    /// Component curves on the plotting grid, when solved.
    pub components: Option<String>,
}

#[derive(Debug, Clone)]
pub struct AngleSets {
    pub runs: Vec<AngleSetRun>,
}

fn join_angles(v: &[f64]) -> String {
    v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";")
}

impl AngleSets {
    pub fn csv(&self) -> String {
        let mut out = format!("{ANGLE_SETS_HEADER}\n");
        for r in &self.runs {
            let iters = r.outcome.record().map_or(0, |x| x.summary.iterations);
            out.push_str(&format!(
                "{},{},{},{},{iters}\n",
                r.set.name,
                join_angles(&r.set.users_deg),
                join_angles(&r.set.targets_deg),
                r.outcome.power_cell()
            ));
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&AngleSetRun> {
        self.runs.iter().find(|r| r.set.name == name)
    }
}

pub fn angle_sets(base: &Scenario, sets: &[AngleSet], params: &IrmParams, workers: usize) -> Result<AngleSets> {
    if sets.is_empty() {
        return Err(Error::invalid("no angle sets given"));
    }
    let scenarios =
        sets.iter().map(|s| scenario_with_angles(base, &s.users_deg, &s.targets_deg)).collect::<Result<Vec<_>>>()?;
    let outcomes = run_batch(&scenarios, params, workers)?;
    let runs = sets
        .iter()
        .zip(scenarios.iter().zip(outcomes))
        .map(|(set, (scenario, outcome))| {
            let components = match outcome.record() {
                Some(r) => Some(beampattern_csv(&r.solution.to_set()?, scenario)?),
                None => None,
            };
            Ok(AngleSetRun { set: set.clone(), outcome, components })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AngleSets { runs })
}

/// Writes the summary table and per-run records of a sweep into `dir`.
pub fn write_antenna_sweep(sweep: &AntennaSweep, dir: &Path) -> Result<PathBuf> {
    let stems: Vec<String> = sweep.antennas.iter().map(|n| format!("run_N{n}")).collect();
    save_outcomes(dir, &stems, &sweep.outcomes)?;
    let path = dir.join("antenna_sweep.csv");
    write_atomic(&path, sweep.csv().as_bytes())?;
    Ok(path)
}

pub fn write_distance_sweep(sweep: &DistanceSweep, dir: &Path) -> Result<PathBuf> {
    let stems: Vec<String> = sweep
        .points
        .iter()
        .map(|p| format!("run_{}_d{}_delta{}", p.entity.as_str(), p.distance_m, p.delta_deg))
        .collect();
    save_outcomes(dir, &stems, &sweep.outcomes)?;
    let path = dir.join("distance_sweep.csv");
    write_atomic(&path, sweep.csv().as_bytes())?;
    Ok(path)
}

pub fn write_angle_sets(sets: &AngleSets, dir: &Path) -> Result<PathBuf> {
    for r in &sets.runs {
        let stem = format!("set_{}", r.set.name);
        save_outcomes(dir, std::slice::from_ref(&stem), std::slice::from_ref(&r.outcome))?;
        if let Some(c) = &r.components {
            write_atomic(&dir.join(format!("{stem}_components.csv")), c.as_bytes())?;
        }
    }
    let path = dir.join("angle_sets.csv");
    write_atomic(&path, sets.csv().as_bytes())?;
    Ok(path)
}

/// Margins of every constraint of a recorded solution.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(ConstraintCheck::passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "{} {} value={} bound={} margin={}\n",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                format_sig9(c.value),
                format_sig9(c.bound),
                format_sig9(c.margin)
            ));
        }
        out
    }
}

pub fn validate_record(record: &RunRecord, tol: &FeasibilityTolerances) -> Result<ValidationReport> {
    let scenario = record.scenario()?;
    let pattern = build_desired_pattern(&scenario)?;
    let set = record.solution.to_set()?;
    if set.dim() != scenario.num_antennas() || set.num_users() != scenario.num_users() {
        return Err(Error::dims("recorded solution does not match its scenario"));
    }
    Ok(ValidationReport { checks: check_constraints(&set, &scenario, &pattern, tol)?.checks })
}

pub fn validate_solution(path: &Path, tol: &FeasibilityTolerances) -> Result<ValidationReport> {
    validate_record(&RunRecord::load(path)?, tol)
}

fn py_str(p: &Path) -> String {
    let s = p.to_string_lossy();
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn csv_header(path: &Path) -> Result<Vec<String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let first = text.lines().next().unwrap_or_default();
    if first.is_empty() {
        return Err(Error::Config(format!("{} has no header", path.display())));
    }
    Ok(first.split(',').map(str::to_string).collect())
}

/// A matplotlib script drawing one panel per CSV. Panels are chosen from
/// the header; the script is written, never run.
pub fn emit_plot_script(csvs: &[PathBuf], output: &Path) -> Result<()> {
    if csvs.is_empty() {
        return Err(Error::invalid("no CSV files to plot"));
    }
    let mut panels = Vec::new();
    for p in csvs {
        let header = csv_header(p)?;
        let kind = match header.join(",").as_str() {
            BEAMPATTERN_HEADER => "beampattern",
            ANTENNA_SWEEP_HEADER => "antennas",
            DISTANCE_SWEEP_HEADER => "distance",
            ANGLE_SETS_HEADER => "angle_sets",
            "iter,phi,r,power_mW" => "trace",
            _ => "generic",
        };
        panels.push(format!("    ({}, \"{kind}\"),", py_str(p)));
    }
    let script = format!(
        r#"#!/usr/bin/env python3
import csv
import math

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

PANELS = [
{panels}
]


def num(x):
    try:
        return float(x)
    except ValueError:
        return math.nan


def rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def beampattern(ax, data):
    x = [num(r["angle_deg"]) for r in data]
    for col, label in (("total_dBm", "total"), ("comm_dBm", "communication"), ("radar_dBm", "radar")):
        ax.plot(x, [num(r[col]) for r in data], label=label)
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("beampattern (dBm)")
    ax.set_xlim(-90, 90)
    ax.legend()


def antennas(ax, data):
    ax.plot([num(r["N"]) for r in data], [num(r["power_dBm"]) for r in data], marker="o")
    ax.set_xlabel("antennas")
    ax.set_ylabel("total power (dBm)")


def distance(ax, data):
    keys = []
    for r in data:
        k = (r["swept_entity"], r["delta_deg"])
        if k not in keys:
            keys.append(k)
    for entity, delta in keys:
        sel = [r for r in data if r["swept_entity"] == entity and r["delta_deg"] == delta]
        ax.plot([num(r["distance_m"]) for r in sel], [num(r["power_dBm"]) for r in sel], marker="o",
                label=f"{{entity}}, delta={{delta}} deg")
    ax.set_xlabel("distance (m)")
    ax.set_ylabel("total power (dBm)")
    ax.legend()


def angle_sets(ax, data):
    ax.bar([r["set"] for r in data], [num(r["power_dBm"]) for r in data])
    ax.set_ylabel("total power (dBm)")


def trace(ax, data):
    ax.semilogy([num(r["iter"]) for r in data], [max(num(r["r"]), 1e-300) for r in data], marker="o")
    ax.set_xlabel("iteration")
    ax.set_ylabel("r")


def generic(ax, data):
    cols = list(data[0].keys()) if data else []
    for c in cols[1:]:
        ax.plot([num(r[cols[0]]) for r in data], [num(r[c]) for r in data], label=c)
    if cols:
        ax.set_xlabel(cols[0])
        ax.legend()


def main():
    fig, axes = plt.subplots(len(PANELS), 1, figsize=(7, 3.5 * len(PANELS)), squeeze=False)
    for ax, (path, kind) in zip(axes[:, 0], PANELS):
        globals()[kind](ax, rows(path))
        ax.set_title(path)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig("figure.png", dpi=150)


if __name__ == "__main__":
    main()
"#,
        panels = panels.join("\n")
    );
    write_atomic(output, script.as_bytes())
}
