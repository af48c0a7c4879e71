//! Independent verification of a returned solution against the original
//! (unlowered) problem data.

use nalgebra::DMatrix;

use super::{inner, ConicProblem, ConicSolution, SdpField, Sense};
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;

#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Absolute violation per linear constraint (0 when satisfied).
    pub constraint_violations: Vec<f64>,
    /// Smallest eigenvalue of each block.
    pub block_min_eigenvalues: Vec<f64>,
    /// Smallest eigenvalue of `x I - M^H X M` per LMI.
    pub lmi_min_eigenvalues: Vec<f64>,
    /// Amount by which each bounded scalar is below its bound (0 when not).
    pub bound_violations: Vec<f64>,
    /// Total complementarity `<X, Z>` summed over every cone, when duals
    /// are available.
    pub complementarity: Option<f64>,
    pub objective: f64,
}

impl KktReport {
    pub fn max_constraint_violation(&self) -> f64 {
        self.constraint_violations.iter().chain(&self.bound_violations).fold(0.0, |m, v| m.max(*v))
    }

    pub fn min_cone_eigenvalue(&self) -> f64 {
        self.block_min_eigenvalues.iter().chain(&self.lmi_min_eigenvalues).fold(f64::INFINITY, |m, v| m.min(*v))
    }
}

fn min_eig<T: SdpField>(m: &DMatrix<T>) -> Result<f64> {
    let e = symmetric_eigenvalues(&T::embed(m))?;
    Ok(e[0])
}

fn lmi_slack<T: SdpField>(x: f64, map: &DMatrix<T>, block: &DMatrix<T>) -> DMatrix<T> {
    let m = map.ncols();
    let mut s = -(map.adjoint() * block * map);
    for i in 0..m {
        s[(i, i)] += T::from_parts(x, 0.0);
    }
    s
}

pub fn check_kkt<T: SdpField>(problem: &ConicProblem<T>, sol: &ConicSolution<T>) -> Result<KktReport> {
    problem.validate()?;
    if sol.blocks.len() != problem.blocks().len() || sol.scalars.len() != problem.scalars().len() {
        return Err(Error::dims("solution does not match the problem's variables"));
    }
    for (x, b) in sol.blocks.iter().zip(problem.blocks()) {
        if x.nrows() != b.dim || x.ncols() != b.dim {
            return Err(Error::dims(format!("block {} has the wrong shape", b.name)));
        }
    }
    let mut constraint_violations = Vec::with_capacity(problem.num_constraints());
    let mut comp = 0.0;
    let dual = sol.dual.as_ref();
    for (i, c) in problem.constraints().iter().enumerate() {
        let lhs = problem.constraint_lhs(i, sol);
        let v = match c.sense {
            Sense::Ge => (c.rhs - lhs).max(0.0),
            Sense::Le => (lhs - c.rhs).max(0.0),
            Sense::Eq => (lhs - c.rhs).abs(),
        };
        constraint_violations.push(v);
        if let Some(d) = dual {
            if c.sense != Sense::Eq {
                comp += (d.constraint_multipliers[i] * (lhs - c.rhs)).abs();
            }
        }
    }
    let block_min_eigenvalues = sol.blocks.iter().map(min_eig).collect::<Result<Vec<_>>>()?;
    let mut lmi_min_eigenvalues = Vec::with_capacity(problem.lmis().len());
    for (l, lmi) in problem.lmis().iter().enumerate() {
        let s = lmi_slack(sol.scalars[lmi.scalar.0], &lmi.map, &sol.blocks[lmi.block.0]);
        lmi_min_eigenvalues.push(min_eig(&s)?);
        if let Some(d) = dual {
            comp += inner(&s, &d.lmi_multipliers[l]);
        }
    }
    let mut bound_violations = Vec::new();
    for (s, var) in problem.scalars().iter().enumerate() {
        if let Some(l) = var.lower {
            bound_violations.push((l - sol.scalars[s]).max(0.0));
            if let Some(d) = dual {
                comp += (sol.scalars[s] - l) * d.scalar_slacks[s];
            }
        }
    }
    if let Some(d) = dual {
        for (x, z) in sol.blocks.iter().zip(&d.block_slacks) {
            comp += inner(x, z);
        }
    }
    Ok(KktReport {
        constraint_violations,
        block_min_eigenvalues,
        lmi_min_eigenvalues,
        bound_violations,
        complementarity: dual.map(|_| comp),
        objective: problem.objective_value(sol),
    })
}
