//! The relaxed beamforming program and its rank-penalized variant, stated as
//! [`ConicProblem`]s, and the map from solver output back to covariances.
//!
//! Relaxed problem, with `H_k = h_k h_k^H` and `G_m` the Gram matrix of
//! pattern sample `m`:
//!
//! ```text
//! min   sum_k tr(W_k) + tr(R_d)
//! s.t.  tr(H_k W_k) - Rb sum_{i!=k} tr(H_k W_i) - Rb tr(H_k R_d) >= Rb sigma_k^2
//!       rho_m - eta_m <= tr(G_m (sum_k W_k + R_d)) <= rho_m + eta_m
//!       W_k, R_d >= 0
//! ```
//!
//! The penalized variant adds `phi r` to the objective, `r >= 0`, and
//! `r I - V_k^H W_k V_k >= 0` per user.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, HermitianMatrix, C64, PSD_TOL};
use crate::metrics::BeamformerSet;
use crate::scene::{nearest_target, steering_vector, DesiredBeampattern, Scenario};
use crate::sdp::{BlockId, ConicProblem, ConicSolution, LinearConstraint, LmiConstraint, ScalarId, Sense};

/// Which quadratic form the pattern constraints bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternConvention {
    /// `a^H X a`, the pathloss-free transmit beampattern.
    #[default]
    TransmitSide,
    /// `beta a^H X a`, the beam gain through the target's channel.
    ChannelInclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormulationOptions {
    pub convention: PatternConvention,
    /// When false the radar covariance is fixed to zero and omitted.
    pub include_radar_covariance: bool,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        Self { convention: PatternConvention::TransmitSide, include_radar_covariance: true }
    }
}

/// One pattern constraint pair `lower <= g^H X g <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternRow {
    pub angle_deg: f64,
    pub gram_vector: CVector,
    pub lower: f64,
    pub upper: f64,
}

/// Data of the relaxed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSpec {
    pub num_antennas: usize,
    pub user_channels: Vec<CVector>,
    pub noise_powers: Vec<f64>,
    /// `2^R_min - 1`.
    pub sinr_threshold: f64,
    pub pattern: Vec<PatternRow>,
    pub include_radar_covariance: bool,
}

impl RelaxedSpec {
    pub fn from_scenario(
        scenario: &Scenario,
        pattern: &DesiredBeampattern,
        options: &FormulationOptions,
    ) -> Result<Self> {
        scenario.validate()?;
        if pattern.is_empty() {
            return Err(Error::invalid("desired beampattern is empty"));
        }
        let user_channels = (0..scenario.num_users()).map(|k| scenario.user_channel(k)).collect::<Result<_>>()?;
        let noise_powers = scenario.users.iter().map(|u| u.noise_power).collect();
        let mut rows = Vec::with_capacity(pattern.len());
        for s in pattern.samples() {
            let a = steering_vector(&scenario.array, s.angle_deg)?;
            let g = match options.convention {
                PatternConvention::TransmitSide => a,
                PatternConvention::ChannelInclusive => {
                    let p = s.target.unwrap_or_else(|| nearest_target(scenario, s.angle_deg));
                    let beta = scenario.target_pathloss(p)?;
                    a * C64::new(beta.sqrt(), 0.0)
                }
            };
            rows.push(PatternRow { angle_deg: s.angle_deg, gram_vector: g, lower: s.lower(), upper: s.upper() });
        }
        let spec = Self {
            num_antennas: scenario.num_antennas(),
            user_channels,
            noise_powers,
            sinr_threshold: 2f64.powf(scenario.rate_floor) - 1.0,
            pattern: rows,
            include_radar_covariance: options.include_radar_covariance,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn num_users(&self) -> usize {
        self.user_channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_antennas;
        if n == 0 {
            return Err(Error::invalid("no antennas"));
        }
        if self.user_channels.len() != self.noise_powers.len() {
            return Err(Error::dims("one noise power per user required"));
        }
        if self.user_channels.iter().any(|h| h.len() != n) || self.pattern.iter().any(|r| r.gram_vector.len() != n) {
            return Err(Error::dims("channel and steering vectors must match the array size"));
        }
        if !(self.sinr_threshold >= 0.0 && self.sinr_threshold.is_finite()) {
            return Err(Error::invalid("SINR threshold must be nonnegative"));
        }
        if self.noise_powers.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("noise powers must be positive"));
        }
        if self.user_channels.is_empty() && self.pattern.is_empty() {
            return Err(Error::invalid("no users and no pattern samples"));
        }
        for r in &self.pattern {
            if !(r.lower < r.upper) {
                return Err(Error::invalid(format!("pattern bounds at {} deg are empty", r.angle_deg)));
            }
        }
        Ok(())
    }
}

/// Data of the rank-penalized problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedSpec {
    pub base: RelaxedSpec,
    /// `N x (N-1)` orthonormal panel per user.
    pub panels: Vec<CMatrix>,
    pub weight: f64,
}

/// Panels whose columns are orthonormal to this tolerance are accepted.
pub const PANEL_ORTHONORMALITY_TOL: f64 = 1e-10;

impl PenalizedSpec {
    pub fn new(base: RelaxedSpec, panels: Vec<CMatrix>, weight: f64) -> Result<Self> {
        base.validate()?;
        if panels.len() != base.num_users() {
            return Err(Error::dims(format!("{} panels for {} users", panels.len(), base.num_users())));
        }
        let n = base.num_antennas;
        for (k, v) in panels.iter().enumerate() {
            if v.nrows() != n || v.ncols() == 0 || v.ncols() > n {
                return Err(Error::dims(format!("panel {k} is {}x{}, expected {n}x{}", v.nrows(), v.ncols(), n - 1)));
            }
            let gram = v.adjoint() * v;
            let err = (gram - CMatrix::identity(v.ncols(), v.ncols())).norm();
            if err > PANEL_ORTHONORMALITY_TOL {
                return Err(Error::invalid(format!("panel {k} is not orthonormal (error {err:.2e})")));
            }
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::invalid("penalty weight must be positive"));
        }
        Ok(Self { base, panels, weight })
    }
}

/// Where each variable and constraint landed in a built problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemLayout {
    pub users: Vec<BlockId>,
    pub radar: Option<BlockId>,
    pub relaxation: Option<ScalarId>,
    /// Constraint index of each user's SINR row.
    pub sinr_rows: Vec<usize>,
    /// Constraint indices `(lower, upper)` per pattern sample; no lower row
    /// when the bound is nonpositive.
    pub pattern_rows: Vec<(Option<usize>, usize)>,
}

fn gram(v: &CVector) -> CMatrix {
    HermitianMatrix::outer(v).into_inner()
}

pub fn build_relaxed(spec: &RelaxedSpec) -> Result<(ConicProblem, ProblemLayout)> {
    spec.validate()?;
    let n = spec.num_antennas;
    let k_users = spec.num_users();
    let mut p = ConicProblem::new();
    let users: Vec<BlockId> = (0..k_users).map(|k| p.add_block(format!("W{}", k + 1), n)).collect();
    let radar = spec.include_radar_covariance.then(|| p.add_block("Rd", n));
    let all: Vec<BlockId> = users.iter().copied().chain(radar).collect();
    for &b in &all {
        p.set_block_objective(b, CMatrix::identity(n, n));
    }

    let rb = spec.sinr_threshold;
    let mut sinr_rows = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let h = gram(&spec.user_channels[k]);
        let mut con = LinearConstraint::new(format!("sinr{}", k + 1), Sense::Ge, rb * spec.noise_powers[k]);
        for (i, &b) in all.iter().enumerate() {
            let coef = if i == k { h.clone() } else { &h * C64::new(-rb, 0.0) };
            if i == k || rb > 0.0 {
                con = con.block(b, coef);
            }
        }
        sinr_rows.push(p.num_constraints());
        p.add_constraint(con);
    }

    let mut pattern_rows = Vec::with_capacity(spec.pattern.len());
    for (m, row) in spec.pattern.iter().enumerate() {
        let g = gram(&row.gram_vector);
        let terms = |mut con: LinearConstraint| {
            for &b in &all {
                con = con.block(b, g.clone());
            }
            con
        };
        // A nonpositive lower bound is implied by X >= 0.
        let lo = (row.lower > 0.0).then(|| {
            p.add_constraint(terms(LinearConstraint::new(format!("pattern_lo{m}"), Sense::Ge, row.lower)));
            p.num_constraints() - 1
        });
        let hi = p.num_constraints();
        p.add_constraint(terms(LinearConstraint::new(format!("pattern_hi{m}"), Sense::Le, row.upper)));
        pattern_rows.push((lo, hi));
    }

    Ok((p, ProblemLayout { users, radar, relaxation: None, sinr_rows, pattern_rows }))
}

pub fn build_penalized(spec: &PenalizedSpec) -> Result<(ConicProblem, ProblemLayout)> {
    let (mut p, mut layout) = build_relaxed(&spec.base)?;
    let r = p.add_scalar("r", Some(0.0));
    p.set_scalar_objective(r, spec.weight);
    for (k, v) in spec.panels.iter().enumerate() {
        p.add_lmi(LmiConstraint { name: format!("rank{}", k + 1), scalar: r, block: layout.users[k], map: v.clone() });
    }
    layout.relaxation = Some(r);
    Ok((p, layout))
}

/// Covariances of a solved problem; rejects blocks that are not PSD within
/// `PSD_TOL` relative to their largest eigenvalue.
pub fn extract_solution(solution: &ConicSolution, layout: &ProblemLayout) -> Result<BeamformerSet> {
    let get = |b: BlockId, name: &str| -> Result<HermitianMatrix> {
        let m = solution.blocks.get(b.0).ok_or_else(|| Error::dims(format!("solution lacks block {name}")))?;
        let h = HermitianMatrix::symmetrized(m.clone());
        let (lo, hi) = h.min_max_eigenvalues()?;
        if lo < -PSD_TOL * hi.max(0.0) && lo < -f64::MIN_POSITIVE {
            return Err(Error::NumericalFailure(format!(
                "block {name} has eigenvalue {lo:.3e} against largest {hi:.3e}"
            )));
        }
        Ok(h)
    };
    let users =
        layout.users.iter().enumerate().map(|(k, &b)| get(b, &format!("W{}", k + 1))).collect::<Result<Vec<_>>>()?;
    let n = users
        .first()
        .map(|w| w.dim())
        .or_else(|| layout.radar.and_then(|b| solution.blocks.get(b.0).map(|m| m.nrows())));
    let radar = match layout.radar {
        Some(b) => get(b, "Rd")?,
        None => HermitianMatrix::zeros(n.unwrap_or(0)),
    };
    BeamformerSet::new(users, radar)
}
