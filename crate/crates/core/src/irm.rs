//! Iterative rank minimization: solve the relaxation, then re-solve with a
//! growing penalty on the energy of each `W_k` outside its dominant
//! eigenvector until every `W_k` is rank one.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulation::{
    build_penalized, build_relaxed, extract_solution, FormulationOptions, PenalizedSpec, ProblemLayout, RelaxedSpec,
};
use crate::linalg::{CMatrix, CVector, HermitianMatrix, C64};
use crate::metrics::{format_sig9, total_power, BeamformerSet};
use crate::scene::{build_desired_pattern, Scenario};
use crate::sdp::{solve, ConicSolution, SolverOptions, SolverReport, SolverStatus};

/// How the stopping rule measures `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankNormalization {
    /// `(r / lambda_1max)^2 <= threshold`, with `lambda_1max` the largest
    /// top eigenvalue over all `W_k`.
    #[default]
    Relative,
    /// `r^2 <= threshold` in mW^2.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrmParams {
    pub initial_weight: f64,
    pub step: f64,
    pub rank_threshold: f64,
    pub normalization: RankNormalization,
    pub max_iterations: usize,
    /// Bound on `lambda_2 / lambda_1` for each `W_k`.
    pub rank_one_tol: f64,
    pub solver: SolverOptions,
    pub formulation: FormulationOptions,
}

impl Default for IrmParams {
    fn default() -> Self {
        Self {
            initial_weight: 1.0,
            step: 1.5,
            rank_threshold: 1e-7,
            normalization: RankNormalization::Relative,
            max_iterations: 50,
            rank_one_tol: 1e-6,
            solver: SolverOptions::default(),
            formulation: FormulationOptions::default(),
        }
    }
}

impl IrmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 1.0 && self.step.is_finite()) {
            return Err(Error::invalid("IRM step must exceed 1"));
        }
        if !(self.initial_weight > 0.0 && self.initial_weight.is_finite()) {
            return Err(Error::invalid("initial IRM weight must be positive"));
        }
        if !(self.rank_threshold > 0.0) || !(self.rank_one_tol > 0.0) {
            return Err(Error::invalid("rank thresholds must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("IRM needs at least one iteration"));
        }
        self.solver.validate()
    }
}

/// Orthonormal eigenvectors of the `N - 1` smallest eigenvalues, ascending.
pub fn null_eigvecs(w: &HermitianMatrix) -> Result<CMatrix> {
    let n = w.dim();
    let e = w.eigen()?;
    Ok(e.vectors.columns(0, n.saturating_sub(1)).into_owned())
}

/// `lambda_2 / lambda_1` of the two largest eigenvalues; 0 when `N = 1`.
pub fn rank_one_ratio(w: &HermitianMatrix) -> Result<f64> {
    let n = w.dim();
    let e = w.eigen()?;
    let l1 = e.values[n - 1];
    if !(l1 > 0.0) {
        return Err(Error::invalid("rank-one ratio of a matrix without positive eigenvalues"));
    }
    if n == 1 {
        return Ok(0.0);
    }
    Ok((e.values[n - 2] / l1).clamp(0.0, 1.0))
}

/// `||W - lambda_1 v_1 v_1^H||_F / ||W||_F`.
pub fn rank_one_residual(w: &HermitianMatrix) -> Result<f64> {
    let e = w.eigen()?;
    let n = w.dim();
    let tail: f64 = e.values.iter().take(n - 1).map(|v| v * v).sum();
    let all = tail + e.values[n - 1].powi(2);
    Ok(if all > 0.0 { (tail / all).sqrt() } else { 0.0 })
}

/// `w = sqrt(lambda_1) v_1`, phase-rotated so its largest-magnitude entry is
/// real and nonnegative.
pub fn extract_beamformer(w: &HermitianMatrix, rank_one_tol: f64, index: usize) -> Result<CVector> {
    let ratio = rank_one_ratio(w)?;
    if ratio > rank_one_tol {
        return Err(Error::RankOneViolation { index, ratio, tol: rank_one_tol });
    }
    let e = w.eigen()?;
    let n = w.dim();
    let v = e.vectors.column(n - 1).into_owned();
    let mut pivot = 0;
    for i in 1..n {
        if v[i].norm() > v[pivot].norm() {
            pivot = i;
        }
    }
    let phase = if v[pivot].norm() > 0.0 { v[pivot].conj() / v[pivot].norm() } else { C64::new(1.0, 0.0) };
    Ok(v * (phase * e.values[n - 1].sqrt()))
}

pub fn extract_beamformers(ws: &[HermitianMatrix], rank_one_tol: f64) -> Result<Vec<CVector>> {
    ws.iter().enumerate().map(|(k, w)| extract_beamformer(w, rank_one_tol, k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub phi: f64,
    pub r: f64,
    pub power_mw: f64,
    pub max_rank_one_ratio: f64,
}

/// Loop state between penalized solves.
#[derive(Debug, Clone)]
pub struct IrmState {
    pub iteration: usize,
    /// Weight for the next penalized solve.
    pub weight: f64,
    pub current: BeamformerSet,
    pub r: Option<f64>,
    pub panels: Vec<CMatrix>,
    pub power_history: Vec<f64>,
    spec: RelaxedSpec,
}

impl IrmState {
    pub fn spec(&self) -> &RelaxedSpec {
        &self.spec
    }
}

#[derive(Debug, Clone)]
pub struct IrmResult {
    /// Final covariances, with extracted vectors when converged.
    pub set: BeamformerSet,
    /// Relaxation optimum (lower bound).
    pub sdr_set: BeamformerSet,
    pub iterations: usize,
    pub final_r: f64,
    pub converged: bool,
    pub sdr_power: f64,
    pub final_power: f64,
    pub rank_one_ratios: Vec<f64>,
    pub trace: Vec<IterationRecord>,
    pub solver_reports: Vec<SolverReport>,
    pub message: String,
}

fn solve_checked(
    problem: &crate::sdp::ConicProblem,
    layout: &ProblemLayout,
    options: &SolverOptions,
) -> Result<(ConicSolution, SolverReport, BeamformerSet)> {
    let (sol, rep) = solve(problem, options)?;
    match rep.status {
        SolverStatus::Optimal => {}
        SolverStatus::Infeasible => return Err(Error::Infeasible(rep.message.clone())),
        other => {
            return Err(Error::NumericalFailure(format!(
                "solver stopped with status {} after {} iterations: {}",
                other.as_str(),
                rep.iterations,
                rep.message
            )))
        }
    }
    let set = extract_solution(&sol, layout)?;
    Ok((sol, rep, set))
}

struct Assessment {
    ratios: Vec<f64>,
    residuals: Vec<f64>,
    top: f64,
}

fn assess(set: &BeamformerSet) -> Result<Assessment> {
    let mut ratios = Vec::new();
    let mut residuals = Vec::new();
    let mut top = 0.0_f64;
    for w in set.covariances() {
        ratios.push(rank_one_ratio(w)?);
        residuals.push(rank_one_residual(w)?);
        top = top.max(w.min_max_eigenvalues()?.1);
    }
    Ok(Assessment { ratios, residuals, top })
}

impl Assessment {
    fn rank_one(&self, tol: f64) -> bool {
        self.ratios.iter().chain(&self.residuals).all(|v| *v <= tol)
    }

    fn max_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs the full algorithm on a scenario.
pub fn run_irm(scenario: &Scenario, params: &IrmParams) -> Result<IrmResult> {
    params.validate()?;
    let pattern = build_desired_pattern(scenario)?;
    let spec = RelaxedSpec::from_scenario(scenario, &pattern, &params.formulation)?;
    run_irm_spec(&spec, params)
}

/// Runs the full algorithm on prebuilt problem data.
pub fn run_irm_spec(spec: &RelaxedSpec, params: &IrmParams) -> Result<IrmResult> {
    params.validate()?;
    let (relaxed, layout) = build_relaxed(spec)?;
    let (_, rep, sdr_set) = solve_checked(&relaxed, &layout, &params.solver)?;
    let sdr_power = total_power(&sdr_set);
    let mut reports = vec![rep];
    let mut trace = Vec::new();

    let finish = |set: BeamformerSet, a: &Assessment, iterations, r, converged, trace, reports, message: String| {
        let final_power = total_power(&set);
        IrmResult {
            set,
            sdr_set: sdr_set.clone(),
            iterations,
            final_r: r,
            converged,
            sdr_power,
            final_power,
            rank_one_ratios: a.ratios.clone(),
            trace,
            solver_reports: reports,
            message,
        }
    };

    let a = assess(&sdr_set)?;
    if a.rank_one(params.rank_one_tol) {
        let vectors = extract_beamformers(sdr_set.covariances(), params.rank_one_tol)?;
        let set = sdr_set.clone().with_vectors(vectors, params.rank_one_tol)?;
        return Ok(finish(set, &a, 0, 0.0, true, trace, reports, "relaxation already rank one".into()));
    }

    let mut state = IrmState {
        iteration: 0,
        weight: params.initial_weight,
        current: sdr_set.clone(),
        r: None,
        panels: Vec::new(),
        power_history: vec![sdr_power],
        spec: spec.clone(),
    };
    let mut last = a;
    loop {
        if state.iteration >= params.max_iterations {
            let msg = format!("no convergence after {} iterations", state.iteration);
            let r = state.r.unwrap_or(f64::NAN);
            return Ok(finish(state.current, &last, state.iteration, r, false, trace, reports, msg));
        }
        state.panels = state.current.covariances().iter().map(null_eigvecs).collect::<Result<_>>()?;
        state.iteration += 1;
        let penalized = PenalizedSpec::new(spec.clone(), state.panels.clone(), state.weight)?;
        let (problem, layout4) = build_penalized(&penalized)?;
        let (sol, rep, set) = match solve_checked(&problem, &layout4, &params.solver) {
            Ok(v) => v,
            Err(Error::NumericalFailure(msg)) => {
                let msg = format!("iteration {}: {msg}", state.iteration);
                let r = state.r.unwrap_or(f64::NAN);
                return Ok(finish(state.current, &last, state.iteration, r, false, trace, reports, msg));
            }
            Err(e) => return Err(e),
        };
        reports.push(rep);
        let r = sol.scalars[layout4.relaxation.expect("relaxation scalar").0].max(0.0);
        let power = total_power(&set);
        let a = assess(&set)?;
        trace.push(IterationRecord {
            iter: state.iteration,
            phi: state.weight,
            r,
            power_mw: power,
            max_rank_one_ratio: a.max_ratio(),
        });
        state.power_history.push(power);
        state.r = Some(r);
        state.current = set;
        state.weight *= params.step;
        last = a;

        let measure = match params.normalization {
            RankNormalization::Relative => r / last.top,
            RankNormalization::Absolute => r,
        };
        if measure * measure <= params.rank_threshold && last.rank_one(params.rank_one_tol) {
            let vectors = extract_beamformers(state.current.covariances(), params.rank_one_tol)?;
            let set = state.current.clone().with_vectors(vectors, params.rank_one_tol)?;
            let msg = format!("converged after {} iterations", state.iteration);
            return Ok(finish(set, &last, state.iteration, r, true, trace, reports, msg));
        }
    }
}

/// Writes the iteration trace as `iter,phi,r,power_mW`.
pub fn write_trace_csv(trace: &[IterationRecord], path: &Path) -> Result<()> {
    let mut text = String::from("iter,phi,r,power_mW\n");
    for t in trace {
        text.push_str(&format!("{},{},{},{}\n", t.iter, format_sig9(t.phi), format_sig9(t.r), format_sig9(t.power_mw)));
    }
    crate::io::write_atomic(path, text.as_bytes())
}
