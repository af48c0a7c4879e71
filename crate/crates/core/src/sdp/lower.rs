//! Reduction of a [`ConicProblem`] to the real standard form consumed by the
//! interior-point method, and recovery of the original variables.
//!
//! Each LMI `x I - M^H X M >= 0` becomes an auxiliary PSD block `S` tied to
//! `(x, X)` by one equality per entry of the upper triangle. The `X` side of
//! those rows is kept as a low-rank expression in the columns of the
//! embedded `M`, which keeps Schur-complement assembly cheap.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::ipm::{self, Coef, Row, StdForm};
use super::{ConicProblem, ConicSolution, DualSolution, SdpField, Sense, SolverOptions, SolverReport};
use crate::error::Result;

enum ScalarCol {
    Shifted { col: usize, lower: f64 },
    Free { pos: usize, neg: usize },
}

struct Lowered {
    sf: StdForm,
    scalar_cols: Vec<ScalarCol>,
    /// Std block index of each LMI's auxiliary block.
    lmi_blocks: Vec<usize>,
    row_scale: Vec<f64>,
    b_scale: f64,
    c_scale: f64,
    obj_const: f64,
}

fn classify(m: DMatrix<f64>) -> Coef {
    let n = m.nrows();
    let nnz = m.iter().filter(|v| **v != 0.0).count();
    if nnz <= 2 * n {
        let mut e = Vec::with_capacity(nnz);
        for j in 0..n {
            for i in 0..n {
                if m[(i, j)] != 0.0 {
                    e.push((i, j, m[(i, j)]));
                }
            }
        }
        Coef::Sparse(e)
    } else {
        Coef::Dense(m)
    }
}

fn lower<T: SdpField>(problem: &ConicProblem<T>) -> Lowered {
    let shrink = 1.0 / T::EMBED as f64;
    let nblocks = problem.blocks().len();
    let mut dims: Vec<usize> = problem.blocks().iter().map(|b| T::EMBED * b.dim).collect();
    let mut c: Vec<DMatrix<f64>> = (0..nblocks)
        .map(|b| match problem.block_objective(super::BlockId(b)) {
            Some(m) => T::embed(m) * shrink,
            None => DMatrix::zeros(dims[b], dims[b]),
        })
        .collect();

    let mut lp = 0usize;
    let mut c_lp = Vec::new();
    let mut obj_const = 0.0;
    let mut scalar_cols = Vec::new();
    for (s, var) in problem.scalars().iter().enumerate() {
        let cs = problem.scalar_objective(super::ScalarId(s));
        match var.lower {
            Some(l) => {
                scalar_cols.push(ScalarCol::Shifted { col: lp, lower: l });
                c_lp.push(cs);
                obj_const += cs * l;
                lp += 1;
            }
            None => {
                scalar_cols.push(ScalarCol::Free { pos: lp, neg: lp + 1 });
                c_lp.push(cs);
                c_lp.push(-cs);
                lp += 2;
            }
        }
    }

    let mut rows: Vec<Row> = Vec::new();
    let mut b = Vec::new();
    let scalar_terms = |terms: &[(super::ScalarId, f64)], row: &mut Row, rhs: &mut f64| {
        for &(s, a) in terms {
            match scalar_cols[s.0] {
                ScalarCol::Shifted { col, lower } => {
                    row.lp.push((col, a));
                    *rhs -= a * lower;
                }
                ScalarCol::Free { pos, neg } => {
                    row.lp.push((pos, a));
                    row.lp.push((neg, -a));
                }
            }
        }
    };

    for con in problem.constraints() {
        let mut row = Row::default();
        let mut merged: Vec<Option<DMatrix<f64>>> = vec![None; nblocks];
        for (blk, m) in &con.block_terms {
            let e = T::embed(m) * shrink;
            merged[blk.0] = Some(match merged[blk.0].take() {
                Some(acc) => acc + e,
                None => e,
            });
        }
        for (blk, m) in merged.into_iter().enumerate() {
            if let Some(m) = m {
                row.psd.push((blk, classify(m)));
            }
        }
        let mut rhs = con.rhs;
        scalar_terms(&con.scalar_terms, &mut row, &mut rhs);
        match con.sense {
            Sense::Ge => row.lp.push((lp, -1.0)),
            Sense::Le => row.lp.push((lp, 1.0)),
            Sense::Eq => {}
        }
        if con.sense != Sense::Eq {
            c_lp.push(0.0);
            lp += 1;
        }
        rows.push(row);
        b.push(rhs);
    }

    // Factors: embedded LMI maps of each block, side by side.
    let mut factors: Vec<Option<DMatrix<f64>>> = vec![None; nblocks];
    let mut offsets = Vec::with_capacity(problem.lmis().len());
    for l in problem.lmis() {
        let u = T::embed_rect(&l.map);
        let entry = &mut factors[l.block.0];
        let off = entry.as_ref().map_or(0, |f| f.ncols());
        *entry = Some(match entry.take() {
            None => u,
            Some(f) => {
                let mut g = DMatrix::zeros(f.nrows(), f.ncols() + u.ncols());
                g.columns_mut(0, f.ncols()).copy_from(&f);
                g.columns_mut(f.ncols(), u.ncols()).copy_from(&u);
                g
            }
        });
        offsets.push(off);
    }

    let mut lmi_blocks = Vec::new();
    for (l, lmi) in problem.lmis().iter().enumerate() {
        let m = lmi.map.ncols();
        let aux = dims.len();
        dims.push(T::EMBED * m);
        c.push(DMatrix::zeros(T::EMBED * m, T::EMBED * m));
        factors.push(None);
        lmi_blocks.push(aux);
        let off = offsets[l];
        for a in 0..m {
            for bb in a..m {
                // Real part of entry (a, bb).
                let mut e = DMatrix::<T>::zeros(m, m);
                let v = if a == bb { 1.0 } else { 0.5 };
                e[(a, bb)] = T::from_parts(v, 0.0);
                e[(bb, a)] = T::from_parts(v, 0.0);
                let terms = if T::EMBED == 1 {
                    vec![(off + bb, off + a, 1.0)]
                } else {
                    vec![(off + bb, off + a, 0.5), (off + m + bb, off + m + a, 0.5)]
                };
                let mut row = Row {
                    psd: vec![(lmi.block.0, Coef::LowRank(terms)), (aux, classify(T::embed(&e) * shrink))],
                    lp: Vec::new(),
                };
                let mut rhs = 0.0;
                if a == bb {
                    scalar_terms(&[(lmi.scalar, -1.0)], &mut row, &mut rhs);
                }
                rows.push(row);
                b.push(rhs);

                if T::EMBED == 2 && a < bb {
                    let mut e = DMatrix::<T>::zeros(m, m);
                    e[(bb, a)] = T::from_parts(0.0, -0.5);
                    e[(a, bb)] = T::from_parts(0.0, 0.5);
                    let terms = vec![(off + m + bb, off + a, -0.5), (off + bb, off + m + a, 0.5)];
                    rows.push(Row {
                        psd: vec![(lmi.block.0, Coef::LowRank(terms)), (aux, classify(T::embed(&e) * shrink))],
                        lp: Vec::new(),
                    });
                    b.push(0.0);
                }
            }
        }
    }

    // Row equilibration, then global scaling of b and C.
    let mut row_scale = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter_mut().enumerate() {
        let mut sq: f64 = row.lp.iter().map(|(_, a)| a * a).sum();
        for (blk, coef) in &row.psd {
            sq += coef.to_dense(dims[*blk], factors[*blk].as_ref()).norm_squared();
        }
        let rho = if sq > 0.0 { sq.sqrt() } else { 1.0 };
        for (_, coef) in row.psd.iter_mut() {
            coef.scale(1.0 / rho);
        }
        for (_, a) in row.lp.iter_mut() {
            *a /= rho;
        }
        b[i] /= rho;
        row_scale.push(rho);
    }
    let bmax = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let b_scale = if bmax > 0.0 { bmax } else { 1.0 };
    let c_psd = c.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
    let c_lp_norm = c_lp.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c_scale = if c_psd > 0.0 {
        c_psd
    } else if c_lp_norm > 0.0 {
        c_lp_norm
    } else {
        1.0
    };
    for v in b.iter_mut() {
        *v /= b_scale;
    }
    for m in c.iter_mut() {
        *m /= c_scale;
    }
    for v in c_lp.iter_mut() {
        *v /= c_scale;
    }

    Lowered {
        sf: StdForm { dims, factors, lp, c, c_lp: DVector::from_vec(c_lp), rows, b: DVector::from_vec(b) },
        scalar_cols,
        lmi_blocks,
        row_scale,
        b_scale,
        c_scale,
        obj_const,
    }
}

pub(crate) fn solve_with_ipm<T: SdpField>(
    problem: &ConicProblem<T>,
    options: &SolverOptions,
) -> Result<(ConicSolution<T>, SolverReport)> {
    problem.validate()?;
    options.validate()?;
    let start = Instant::now();
    let low = lower(problem);
    let out = ipm::solve(&low.sf, options);

    let nblocks = problem.blocks().len();
    let (sb, sc) = (low.b_scale, low.c_scale);
    let embed = T::EMBED as f64;
    let blocks: Vec<DMatrix<T>> = out.x[..nblocks].iter().map(|x| T::unembed(&(x * sb))).collect();
    let mut scalars = Vec::with_capacity(low.scalar_cols.len());
    let mut scalar_slacks = Vec::with_capacity(low.scalar_cols.len());
    for col in &low.scalar_cols {
        match *col {
            ScalarCol::Shifted { col, lower } => {
                scalars.push(lower + sb * out.x_lp[col]);
                scalar_slacks.push(sc * out.z_lp[col]);
            }
            ScalarCol::Free { pos, neg } => {
                scalars.push(sb * (out.x_lp[pos] - out.x_lp[neg]));
                scalar_slacks.push(0.0);
            }
        }
    }
    let ncon = problem.num_constraints();
    let constraint_multipliers = (0..ncon).map(|i| sc * out.y[i] / low.row_scale[i]).collect();
    let block_slacks = out.z[..nblocks].iter().map(|z| T::unembed(&(z * (sc * embed)))).collect();
    let lmi_multipliers = low.lmi_blocks.iter().map(|&k| T::unembed(&(&out.z[k] * (sc * embed)))).collect();

    let mut sol = ConicSolution {
        blocks,
        scalars,
        objective: 0.0,
        dual_objective: sc * sb * low.sf.b.dot(&out.y) + low.obj_const,
        dual: Some(DualSolution { constraint_multipliers, block_slacks, scalar_slacks, lmi_multipliers }),
    };
    sol.objective = problem.objective_value(&sol);
    let report = SolverReport {
        status: out.status,
        iterations: out.iterations,
        duality_gap: out.gap,
        primal_residual: out.pinf,
        dual_residual: out.dinf,
        wall_time: start.elapsed(),
        message: out.message,
    };
    Ok((sol, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::sdp::{embed_hermitian, LmiConstraint};

    #[test]
    fn low_rank_rows_match_embedded_coefficients() {
        let n = 3;
        let m = 2;
        let map = DMatrix::from_fn(n, m, |i, j| C64::new(0.3 * i as f64 - j as f64, 0.7 + (i * j) as f64));
        let mut p = ConicProblem::<C64>::new();
        let x = p.add_block("X", n);
        let r = p.add_scalar("r", Some(0.0));
        p.add_lmi(LmiConstraint { name: "lmi".into(), scalar: r, block: x, map: map.clone() });
        let low = lower(&p);
        let u = low.sf.factors[0].as_ref().unwrap();
        let mut k = 0;
        for a in 0..m {
            for b in a..m {
                let ma = map.column(a).into_owned();
                let mb = map.column(b).into_owned();
                let outer_ba = &mb * ma.adjoint();
                let outer_ab = &ma * mb.adjoint();
                let g_re = (&outer_ba + &outer_ab) * C64::new(0.5, 0.0);
                let expect = embed_hermitian(&g_re) * (0.5 / low.row_scale[k]);
                let got = low.sf.rows[k].psd[0].1.to_dense(2 * n, Some(u));
                assert!((got - expect).norm() < 1e-13, "re row ({a},{b})");
                k += 1;
                if a < b {
                    let g_im = (&outer_ba - &outer_ab) * C64::new(0.0, -0.5);
                    let expect = embed_hermitian(&g_im) * (0.5 / low.row_scale[k]);
                    let got = low.sf.rows[k].psd[0].1.to_dense(2 * n, Some(u));
                    assert!((got - expect).norm() < 1e-13, "im row ({a},{b})");
                    k += 1;
                }
            }
        }
        assert_eq!(k, m * m);
    }
}
