//! Standard-form semidefinite programs over Hermitian (or real symmetric)
//! matrix blocks and a dense primal-dual interior-point solver.
//!
//! A [`ConicProblem`] is
//!
//! ```text
//! minimize    sum_b <C_b, X_b> + sum_s c_s x_s
//! subject to  sum_b <A_ib, X_b> + sum_s a_is x_s  (<= | >= | =)  b_i
//!             x_s I - M^H X_b M  >= 0              (LMI constraints)
//!             X_b >= 0,  x_s >= l_s                (when a bound is given)
//! ```
//!
//! with `<A, X> = Re tr(A X)`. Complex problems are reduced to real
//! symmetric ones through [`real_embedding`] before they reach the solver.

mod dump;
mod embed;
mod ipm;
mod kkt;
mod lower;

use std::time::Duration;

use nalgebra::{ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

pub use dump::{parse_dump, write_dump};
pub use embed::{embed_hermitian, real_embedding, unembed_symmetric};
pub use kkt::{check_kkt, KktReport};

/// Scalar field of a problem: `f64` (real symmetric blocks) or `C64`
/// (Hermitian blocks).
pub trait SdpField: ComplexField<RealField = f64> + Copy + Send + Sync + 'static {
    /// Real dimension per complex dimension.
    const EMBED: usize;

    fn embed(m: &DMatrix<Self>) -> DMatrix<f64>;
    fn embed_rect(m: &DMatrix<Self>) -> DMatrix<f64>;
    fn unembed(m: &DMatrix<f64>) -> DMatrix<Self>;
    fn from_parts(re: f64, im: f64) -> Self;
    fn parts(self) -> (f64, f64);
}

impl SdpField for f64 {
    const EMBED: usize = 1;

    fn embed(m: &DMatrix<f64>) -> DMatrix<f64> {
        m.clone()
    }

    fn embed_rect(m: &DMatrix<f64>) -> DMatrix<f64> {
        m.clone()
    }

    fn unembed(m: &DMatrix<f64>) -> DMatrix<f64> {
        (m + m.transpose()) * 0.5
    }

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }
}

impl SdpField for C64 {
    const EMBED: usize = 2;

    fn embed(m: &DMatrix<C64>) -> DMatrix<f64> {
        embed_hermitian(m)
    }

    fn embed_rect(m: &DMatrix<C64>) -> DMatrix<f64> {
        embed::embed_rect(m)
    }

    fn unembed(m: &DMatrix<f64>) -> DMatrix<C64> {
        unembed_symmetric(m)
    }

    fn from_parts(re: f64, im: f64) -> Self {
        C64::new(re, im)
    }

    fn parts(self) -> (f64, f64) {
        (self.re, self.im)
    }
}

/// `Re tr(A B)`.
pub fn inner<T: SdpField>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += (a[(i, j)] * b[(j, i)]).real();
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScalarId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct BlockVar {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVar {
    pub name: String,
    /// `None` means free.
    pub lower: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "le",
            Sense::Ge => "ge",
            Sense::Eq => "eq",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint<T: SdpField = C64> {
    pub name: String,
    pub block_terms: Vec<(BlockId, DMatrix<T>)>,
    pub scalar_terms: Vec<(ScalarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl<T: SdpField> LinearConstraint<T> {
    pub fn new(name: impl Into<String>, sense: Sense, rhs: f64) -> Self {
        Self { name: name.into(), block_terms: Vec::new(), scalar_terms: Vec::new(), sense, rhs }
    }

    pub fn block(mut self, b: BlockId, coef: DMatrix<T>) -> Self {
        self.block_terms.push((b, coef));
        self
    }

    pub fn scalar(mut self, s: ScalarId, coef: f64) -> Self {
        self.scalar_terms.push((s, coef));
        self
    }
}

/// `x_s I_m - M^H X_b M >= 0` with `M` of shape `dim(X_b) x m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiConstraint<T: SdpField = C64> {
    pub name: String,
    pub scalar: ScalarId,
    pub block: BlockId,
    pub map: DMatrix<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem<T: SdpField = C64> {
    blocks: Vec<BlockVar>,
    scalars: Vec<ScalarVar>,
    block_objective: Vec<Option<DMatrix<T>>>,
    scalar_objective: Vec<f64>,
    constraints: Vec<LinearConstraint<T>>,
    lmis: Vec<LmiConstraint<T>>,
}

impl<T: SdpField> Default for ConicProblem<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: SdpField> ConicProblem<T> {
    pub fn new() -> Self {
        Self {
            blocks: Vec::new(),
            scalars: Vec::new(),
            block_objective: Vec::new(),
            scalar_objective: Vec::new(),
            constraints: Vec::new(),
            lmis: Vec::new(),
        }
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize) -> BlockId {
        self.blocks.push(BlockVar { name: name.into(), dim });
        self.block_objective.push(None);
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_scalar(&mut self, name: impl Into<String>, lower: Option<f64>) -> ScalarId {
        self.scalars.push(ScalarVar { name: name.into(), lower });
        self.scalar_objective.push(0.0);
        ScalarId(self.scalars.len() - 1)
    }

    pub fn set_block_objective(&mut self, b: BlockId, c: DMatrix<T>) {
        self.block_objective[b.0] = Some(c);
    }

    pub fn set_scalar_objective(&mut self, s: ScalarId, c: f64) {
        self.scalar_objective[s.0] = c;
    }

    pub fn add_constraint(&mut self, c: LinearConstraint<T>) {
        self.constraints.push(c);
    }

    pub fn add_lmi(&mut self, l: LmiConstraint<T>) {
        self.lmis.push(l);
    }

    pub fn blocks(&self) -> &[BlockVar] {
        &self.blocks
    }

    pub fn scalars(&self) -> &[ScalarVar] {
        &self.scalars
    }

    pub fn block_objective(&self, b: BlockId) -> Option<&DMatrix<T>> {
        self.block_objective[b.0].as_ref()
    }

    pub fn scalar_objective(&self, s: ScalarId) -> f64 {
        self.scalar_objective[s.0]
    }

    pub fn constraints(&self) -> &[LinearConstraint<T>] {
        &self.constraints
    }

    pub fn lmis(&self) -> &[LmiConstraint<T>] {
        &self.lmis
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() && self.scalars.is_empty() {
            return Err(Error::invalid("problem has no variables"));
        }
        let check_coef = |what: &str, b: BlockId, m: &DMatrix<T>| -> Result<()> {
            let dim = self.blocks.get(b.0).ok_or_else(|| Error::dims(format!("{what}: unknown block {}", b.0)))?.dim;
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::dims(format!(
                    "{what}: coefficient is {}x{}, block {} is {dim}x{dim}",
                    m.nrows(),
                    m.ncols(),
                    self.blocks[b.0].name
                )));
            }
            let asym = (m - m.adjoint()).norm();
            if asym > 1e-12 * m.norm().max(1.0) {
                return Err(Error::invalid(format!("{what}: coefficient is not Hermitian")));
            }
            if m.iter().any(|z| !z.is_finite()) {
                return Err(Error::invalid(format!("{what}: non-finite coefficient")));
            }
            Ok(())
        };
        for b in &self.blocks {
            if b.dim == 0 {
                return Err(Error::dims(format!("block {} has dimension 0", b.name)));
            }
        }
        for s in &self.scalars {
            if let Some(l) = s.lower {
                if !l.is_finite() {
                    return Err(Error::invalid(format!("scalar {} has a non-finite bound", s.name)));
                }
            }
        }
        for (i, c) in self.block_objective.iter().enumerate() {
            if let Some(c) = c {
                check_coef("objective", BlockId(i), c)?;
            }
        }
        if self.scalar_objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite scalar objective"));
        }
        for c in &self.constraints {
            for (b, m) in &c.block_terms {
                check_coef(&c.name, *b, m)?;
            }
            for (s, v) in &c.scalar_terms {
                if s.0 >= self.scalars.len() {
                    return Err(Error::dims(format!("{}: unknown scalar {}", c.name, s.0)));
                }
                if !v.is_finite() {
                    return Err(Error::invalid(format!("{}: non-finite scalar coefficient", c.name)));
                }
            }
            if !c.rhs.is_finite() {
                return Err(Error::invalid(format!("{}: non-finite right-hand side", c.name)));
            }
            if c.sense == Sense::Eq && c.block_terms.is_empty() && c.scalar_terms.is_empty() {
                return Err(Error::invalid(format!("{}: equality without terms", c.name)));
            }
        }
        for l in &self.lmis {
            let dim = self.blocks.get(l.block.0).ok_or_else(|| Error::dims(format!("{}: unknown block", l.name)))?.dim;
            if l.scalar.0 >= self.scalars.len() {
                return Err(Error::dims(format!("{}: unknown scalar", l.name)));
            }
            if l.map.nrows() != dim || l.map.ncols() == 0 {
                return Err(Error::dims(format!(
                    "{}: map is {}x{}, block dimension {dim}",
                    l.name,
                    l.map.nrows(),
                    l.map.ncols()
                )));
            }
        }
        Ok(())
    }

    /// Left-hand side of constraint `i` at `sol`.
    pub fn constraint_lhs(&self, i: usize, sol: &ConicSolution<T>) -> f64 {
        let c = &self.constraints[i];
        c.block_terms.iter().map(|(b, m)| inner(m, &sol.blocks[b.0])).sum::<f64>()
            + c.scalar_terms.iter().map(|(s, v)| v * sol.scalars[s.0]).sum::<f64>()
    }

    pub fn objective_value(&self, sol: &ConicSolution<T>) -> f64 {
        let blocks: f64 = self
            .block_objective
            .iter()
            .enumerate()
            .filter_map(|(b, c)| c.as_ref().map(|c| inner(c, &sol.blocks[b])))
            .sum();
        blocks + self.scalar_objective.iter().zip(&sol.scalars).map(|(c, x)| c * x).sum::<f64>()
    }
}

/// Dual variables reported alongside a primal solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution<T: SdpField = C64> {
    /// One multiplier per linear constraint; nonnegative for `>=`,
    /// nonpositive for `<=`.
    pub constraint_multipliers: Vec<f64>,
    /// Dual slack matrix per block.
    pub block_slacks: Vec<DMatrix<T>>,
    /// Reduced cost per scalar (zero for free scalars).
    pub scalar_slacks: Vec<f64>,
    /// Dual matrix per LMI.
    pub lmi_multipliers: Vec<DMatrix<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution<T: SdpField = C64> {
    pub blocks: Vec<DMatrix<T>>,
    pub scalars: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub dual: Option<DualSolution<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

impl SolverStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverStatus::Optimal => "optimal",
            SolverStatus::Infeasible => "infeasible",
            SolverStatus::Unbounded => "unbounded",
            SolverStatus::MaxIterations => "max_iterations",
            SolverStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: SolverStatus,
    pub iterations: usize,
    /// Relative duality gap of the scaled problem.
    pub duality_gap: f64,
    /// Relative primal infeasibility of the scaled problem.
    pub primal_residual: f64,
    /// Relative dual infeasibility of the scaled problem.
    pub dual_residual: f64,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    pub message: String,
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(secs.max(0.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Dense HKM primal-dual path following with Mehrotra correction.
    #[default]
    InteriorPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iterations: usize,
    pub backend: Backend,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-8, feas_tol: 1e-8, max_iterations: 200, backend: Backend::InteriorPoint }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0 && self.feas_tol > 0.0) {
            return Err(Error::invalid("solver tolerances must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// A conic solver usable by the formulation and IRM layers.
pub trait ConicBackend {
    fn name(&self) -> &'static str;

    fn solve_complex(
        &self,
        problem: &ConicProblem<C64>,
        options: &SolverOptions,
    ) -> Result<(ConicSolution<C64>, SolverReport)>;

    fn solve_real(
        &self,
        problem: &ConicProblem<f64>,
        options: &SolverOptions,
    ) -> Result<(ConicSolution<f64>, SolverReport)>;
}

/// Reference backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPointBackend;

impl ConicBackend for InteriorPointBackend {
    fn name(&self) -> &'static str {
        "interior_point"
    }

    fn solve_complex(
        &self,
        problem: &ConicProblem<C64>,
        options: &SolverOptions,
    ) -> Result<(ConicSolution<C64>, SolverReport)> {
        lower::solve_with_ipm(problem, options)
    }

    fn solve_real(
        &self,
        problem: &ConicProblem<f64>,
        options: &SolverOptions,
    ) -> Result<(ConicSolution<f64>, SolverReport)> {
        lower::solve_with_ipm(problem, options)
    }
}

pub fn backend(kind: Backend) -> Box<dyn ConicBackend + Send + Sync> {
    match kind {
        Backend::InteriorPoint => Box::new(InteriorPointBackend),
    }
}

/// Solves a problem with the backend selected in `options`.
///
/// `Err` is reserved for malformed input; solver outcomes other than
/// optimality are reported through [`SolverReport::status`], in which case
/// the returned solution is the last iterate and must not be trusted.
pub fn solve<T: SdpField>(
    problem: &ConicProblem<T>,
    options: &SolverOptions,
) -> Result<(ConicSolution<T>, SolverReport)> {
    options.validate()?;
    match options.backend {
        Backend::InteriorPoint => lower::solve_with_ipm(problem, options),
    }
}
