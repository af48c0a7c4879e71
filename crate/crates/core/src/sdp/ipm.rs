//! Infeasible primal-dual path following on a real standard-form SDP
//!
//! ```text
//! min <C, X>  s.t.  A(X) = b,  X = (X_1, .., X_p, x_lp) >= 0
//! ```
//!
//! using the HKM search direction with Mehrotra predictor-corrector.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::{SolverOptions, SolverStatus};

/// Coefficient of one row on one PSD block.
#[derive(Debug, Clone)]
pub(crate) enum Coef {
    Dense(DMatrix<f64>),
    /// All nonzero entries, both triangles.
    Sparse(Vec<(usize, usize, f64)>),
    /// `sum c (u_p u_q^T + u_q u_p^T) / 2` over columns of the block factor.
    LowRank(Vec<(usize, usize, f64)>),
}

impl Coef {
    pub(crate) fn scale(&mut self, s: f64) {
        match self {
            Coef::Dense(m) => *m *= s,
            Coef::Sparse(e) | Coef::LowRank(e) => e.iter_mut().for_each(|t| t.2 *= s),
        }
    }

    pub(crate) fn to_dense(&self, n: usize, factor: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        match self {
            Coef::Dense(m) => m.clone(),
            Coef::Sparse(e) => {
                let mut m = DMatrix::zeros(n, n);
                for &(p, q, v) in e {
                    m[(p, q)] += v;
                }
                m
            }
            Coef::LowRank(e) => {
                let u = factor.expect("low-rank coefficient without a factor");
                let mut m = DMatrix::zeros(n, n);
                for &(p, q, c) in e {
                    let up = u.column(p);
                    let uq = u.column(q);
                    m.ger(0.5 * c, &up, &uq, 1.0);
                    m.ger(0.5 * c, &uq, &up, 1.0);
                }
                m
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Row {
    pub psd: Vec<(usize, Coef)>,
    pub lp: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct StdForm {
    pub dims: Vec<usize>,
    pub factors: Vec<Option<DMatrix<f64>>>,
    pub lp: usize,
    pub c: Vec<DMatrix<f64>>,
    pub c_lp: DVector<f64>,
    pub rows: Vec<Row>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOutput {
    pub x: Vec<DMatrix<f64>>,
    pub x_lp: DVector<f64>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub z_lp: DVector<f64>,
    pub status: SolverStatus,
    pub iterations: usize,
    pub gap: f64,
    pub pinf: f64,
    pub dinf: f64,
    pub message: String,
}

/// Row indices of one block, grouped by coefficient kind.
struct BlockRows {
    dense: Vec<usize>,
    /// `n^2 x dense.len()`, column `t` is `vec(A_{dense[t]})`.
    stack: DMatrix<f64>,
    sparse: Vec<(usize, usize)>,
    lowrank: Vec<(usize, usize)>,
}

struct Operator<'a> {
    sf: &'a StdForm,
    blocks: Vec<BlockRows>,
    /// Per LP column, `(row, coef)`.
    lp_cols: Vec<Vec<(usize, f64)>>,
}

impl<'a> Operator<'a> {
    fn new(sf: &'a StdForm) -> Self {
        let mut blocks: Vec<BlockRows> = sf
            .dims
            .iter()
            .map(|_| BlockRows { dense: vec![], stack: DMatrix::zeros(0, 0), sparse: vec![], lowrank: vec![] })
            .collect();
        let mut lp_cols = vec![Vec::new(); sf.lp];
        for (i, row) in sf.rows.iter().enumerate() {
            for (k, (b, coef)) in row.psd.iter().enumerate() {
                match coef {
                    Coef::Dense(_) => blocks[*b].dense.push(i),
                    Coef::Sparse(_) => blocks[*b].sparse.push((i, k)),
                    Coef::LowRank(_) => blocks[*b].lowrank.push((i, k)),
                }
            }
            for &(l, a) in &row.lp {
                lp_cols[l].push((i, a));
            }
        }
        for (b, br) in blocks.iter_mut().enumerate() {
            let n = sf.dims[b];
            let mut stack = DMatrix::zeros(n * n, br.dense.len());
            for (t, &i) in br.dense.iter().enumerate() {
                let m = sf.rows[i]
                    .psd
                    .iter()
                    .find_map(|(bb, c)| match c {
                        Coef::Dense(m) if *bb == b => Some(m),
                        _ => None,
                    })
                    .expect("dense coefficient");
                stack.column_mut(t).copy_from_slice(m.as_slice());
            }
            br.stack = stack;
        }
        Self { sf, blocks, lp_cols }
    }

    fn entries(&self, row: usize, k: usize) -> &[(usize, usize, f64)] {
        match &self.sf.rows[row].psd[k].1 {
            Coef::Sparse(e) | Coef::LowRank(e) => e,
            Coef::Dense(_) => unreachable!(),
        }
    }

    fn factor(&self, b: usize) -> &DMatrix<f64> {
        self.sf.factors[b].as_ref().expect("block factor")
    }

    /// `A(X)` for symmetric `X`.
    fn apply(&self, x: &[DMatrix<f64>], x_lp: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.sf.rows.len());
        for (b, br) in self.blocks.iter().enumerate() {
            let xb = &x[b];
            if !br.dense.is_empty() {
                let v = br.stack.tr_mul(&DVector::from_column_slice(xb.as_slice()));
                for (t, &i) in br.dense.iter().enumerate() {
                    out[i] += v[t];
                }
            }
            for &(i, k) in &br.sparse {
                out[i] += self.entries(i, k).iter().map(|&(p, q, v)| v * xb[(p, q)]).sum::<f64>();
            }
            if !br.lowrank.is_empty() {
                let u = self.factor(b);
                let p = u.tr_mul(&(xb * u));
                for &(i, k) in &br.lowrank {
                    out[i] += self.entries(i, k).iter().map(|&(a, c, v)| v * p[(a, c)]).sum::<f64>();
                }
            }
        }
        for (l, col) in self.lp_cols.iter().enumerate() {
            for &(i, a) in col {
                out[i] += a * x_lp[l];
            }
        }
        out
    }

    /// `A^T(y)`.
    fn adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut out = Vec::with_capacity(self.blocks.len());
        for (b, br) in self.blocks.iter().enumerate() {
            let n = self.sf.dims[b];
            let mut m = if br.dense.is_empty() {
                DMatrix::zeros(n, n)
            } else {
                let yd = DVector::from_iterator(br.dense.len(), br.dense.iter().map(|&i| y[i]));
                let v = &br.stack * yd;
                DMatrix::from_column_slice(n, n, v.as_slice())
            };
            for &(i, k) in &br.sparse {
                for &(p, q, v) in self.entries(i, k) {
                    m[(p, q)] += y[i] * v;
                }
            }
            if !br.lowrank.is_empty() {
                let u = self.factor(b);
                let r = u.ncols();
                let mut kmat = DMatrix::zeros(r, r);
                for &(i, k) in &br.lowrank {
                    for &(p, q, c) in self.entries(i, k) {
                        kmat[(p, q)] += 0.5 * c * y[i];
                        kmat[(q, p)] += 0.5 * c * y[i];
                    }
                }
                m += u * kmat * u.transpose();
            }
            out.push(m);
        }
        let mut lp = DVector::zeros(self.sf.lp);
        for (l, col) in self.lp_cols.iter().enumerate() {
            lp[l] = col.iter().map(|&(i, a)| a * y[i]).sum();
        }
        (out, lp)
    }

    /// HKM Schur complement `M_ij = sum_b tr(A_ib X_b A_jb Z_b^-1) + sum_l a_il a_jl x_l / z_l`.
    fn schur(&self, x: &[DMatrix<f64>], zi: &[DMatrix<f64>], x_lp: &DVector<f64>, z_lp: &DVector<f64>) -> DMatrix<f64> {
        let m = self.sf.rows.len();
        let mut out = DMatrix::zeros(m, m);
        for (b, br) in self.blocks.iter().enumerate() {
            self.schur_block(b, br, &x[b], &zi[b], &mut out);
        }
        for (l, col) in self.lp_cols.iter().enumerate() {
            let d = x_lp[l] / z_lp[l];
            for &(i, ai) in col {
                for &(j, aj) in col {
                    out[(i, j)] += ai * aj * d;
                }
            }
        }
        out
    }

    fn schur_block(&self, b: usize, br: &BlockRows, x: &DMatrix<f64>, zi: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let n = self.sf.dims[b];
        let lowrank = if br.lowrank.is_empty() {
            None
        } else {
            let u = self.factor(b);
            let xu = x * u;
            let zu = zi * u;
            let p = u.tr_mul(&xu);
            let q = u.tr_mul(&zu);
            Some((u, xu, zu, p, q))
        };

        if !br.dense.is_empty() {
            let nd = br.dense.len();
            let mut g = DMatrix::zeros(n * n, nd);
            let mut tmp = DMatrix::zeros(n, n);
            let mut gi = DMatrix::zeros(n, n);
            for t in 0..nd {
                let a = DMatrix::from_column_slice(n, n, br.stack.column(t).as_slice());
                tmp.gemm(1.0, x, &a, 0.0);
                gi.gemm(1.0, &tmp, zi, 0.0);
                g.column_mut(t).copy_from_slice(gi.as_slice());
            }
            let dd = br.stack.tr_mul(&g);
            for (s, &i) in br.dense.iter().enumerate() {
                for (t, &j) in br.dense.iter().enumerate() {
                    out[(i, j)] += dd[(s, t)];
                }
            }
            for t in 0..nd {
                let i = br.dense[t];
                let gi = DMatrix::from_column_slice(n, n, g.column(t).as_slice());
                for &(j, k) in &br.sparse {
                    let v: f64 = self.entries(j, k).iter().map(|&(p, q, v)| v * gi[(p, q)]).sum();
                    out[(i, j)] += v;
                    out[(j, i)] += v;
                }
                if let Some((u, ..)) = &lowrank {
                    let h = u.tr_mul(&(&gi * *u));
                    for &(j, k) in &br.lowrank {
                        let v: f64 =
                            self.entries(j, k).iter().map(|&(p, q, c)| 0.5 * c * (h[(q, p)] + h[(p, q)])).sum();
                        out[(i, j)] += v;
                        out[(j, i)] += v;
                    }
                }
            }
        }

        for &(i, ki) in &br.sparse {
            let ei = self.entries(i, ki);
            for &(j, kj) in &br.sparse {
                let ej = self.entries(j, kj);
                let mut v = 0.0;
                for &(p, q, vj) in ej {
                    for &(r, s, wi) in ei {
                        v += vj * wi * x[(q, r)] * zi[(s, p)];
                    }
                }
                out[(i, j)] += v;
            }
        }

        if let Some((_, xu, zu, p, q)) = &lowrank {
            for &(i, ki) in &br.lowrank {
                let ei = self.entries(i, ki);
                for &(j, kj) in &br.lowrank {
                    let ej = self.entries(j, kj);
                    let mut v = 0.0;
                    for &(a, bb, cj) in ej {
                        for &(g, d, ci) in ei {
                            // tr(sym(u_a u_b^T) X sym(u_g u_d^T) Z^-1)
                            let t = p[(bb, g)] * q[(d, a)]
                                + p[(bb, d)] * q[(g, a)]
                                + p[(a, g)] * q[(d, bb)]
                                + p[(a, d)] * q[(g, bb)];
                            v += 0.25 * cj * ci * t;
                        }
                    }
                    out[(i, j)] += v;
                }
            }
            for &(i, ki) in &br.sparse {
                let ei = self.entries(i, ki);
                for &(j, kj) in &br.lowrank {
                    let ej = self.entries(j, kj);
                    let mut v = 0.0;
                    for &(a, bb, c) in ej {
                        let mut s1 = 0.0;
                        let mut s2 = 0.0;
                        for &(r, s, w) in ei {
                            s1 += w * xu[(r, bb)] * zu[(s, a)];
                            s2 += w * xu[(r, a)] * zu[(s, bb)];
                        }
                        v += 0.5 * c * (s1 + s2);
                    }
                    out[(i, j)] += v;
                    out[(j, i)] += v;
                }
            }
        }
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Largest `alpha <= cap` with `X + alpha dX >= 0`, given `chol(X)`.
fn max_step_psd(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let li = l.clone().try_inverse()?;
    let t = &li * dx * li.transpose();
    let eig = SymmetricEigen::try_new(sym(&t), 1e-15, 10_000)?;
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Some(if lo < 0.0 { -1.0 / lo } else { f64::INFINITY })
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter().zip(dx.iter()).filter(|(_, d)| **d < 0.0).map(|(v, d)| -v / d).fold(f64::INFINITY, f64::min)
}

fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
}

/// Cholesky of the Schur matrix, regularized on failure.
fn factor_schur(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let scale = m.diagonal().iter().copied().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    for reg in [1e-14, 1e-12, 1e-10, 1e-8] {
        let mut r = m.clone();
        for i in 0..r.nrows() {
            r[(i, i)] += reg * scale;
        }
        if let Some(c) = Cholesky::new(r) {
            return Some(c);
        }
    }
    None
}

struct Iterate {
    x: Vec<DMatrix<f64>>,
    x_lp: DVector<f64>,
    y: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    z_lp: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dx_lp: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    dz_lp: DVector<f64>,
}

fn initial_point(sf: &StdForm) -> Iterate {
    let m = sf.rows.len();
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (b, &n) in sf.dims.iter().enumerate() {
        let nf = n as f64;
        let mut xi: f64 = 10f64.max(nf.sqrt());
        let mut eta: f64 = 10f64.max(nf.sqrt()).max(sf.c[b].norm());
        for (i, row) in sf.rows.iter().enumerate() {
            for (bb, coef) in &row.psd {
                if *bb == b {
                    let an = coef.to_dense(n, sf.factors[b].as_ref()).norm();
                    xi = xi.max(nf * (1.0 + sf.b[i].abs()) / (1.0 + an));
                    eta = eta.max(an);
                }
            }
        }
        x.push(DMatrix::identity(n, n) * xi);
        z.push(DMatrix::identity(n, n) * eta);
    }
    let mut xl = DVector::from_element(sf.lp, 10.0_f64);
    let mut zl = DVector::from_element(sf.lp, 10.0_f64);
    for (i, row) in sf.rows.iter().enumerate() {
        for &(l, a) in &row.lp {
            xl[l] = xl[l].max((1.0 + sf.b[i].abs()) / (1.0 + a.abs()));
            zl[l] = zl[l].max(a.abs()).max(sf.c_lp[l].abs());
        }
    }
    Iterate { x, x_lp: xl, y: DVector::zeros(m), z, z_lp: zl }
}

pub(crate) fn solve(sf: &StdForm, opts: &SolverOptions) -> IpmOutput {
    let op = Operator::new(sf);
    let mut it = initial_point(sf);
    let nu = sf.dims.iter().sum::<usize>() as f64 + sf.lp as f64;
    let b_norm = sf.b.norm();
    let c_norm = (sf.c.iter().map(|c| c.norm_squared()).sum::<f64>() + sf.c_lp.norm_squared()).sqrt();

    let mut stall = 0usize;
    let mut iterations = 0usize;
    let (mut gap, mut pinf, mut dinf);
    let status;
    let mut message = String::new();

    loop {
        // Residuals.
        let ax = op.apply(&it.x, &it.x_lp);
        let rp = &sf.b - &ax;
        let (aty, aty_lp) = op.adjoint(&it.y);
        let rd: Vec<DMatrix<f64>> = (0..sf.dims.len()).map(|b| sym(&(&sf.c[b] - &aty[b] - &it.z[b]))).collect();
        let rd_lp = &sf.c_lp - &aty_lp - &it.z_lp;

        let pobj: f64 = sf.c.iter().zip(&it.x).map(|(c, x)| dot(c, x)).sum::<f64>() + sf.c_lp.dot(&it.x_lp);
        let dobj = sf.b.dot(&it.y);
        let xz: f64 = it.x.iter().zip(&it.z).map(|(x, z)| dot(x, z)).sum::<f64>() + it.x_lp.dot(&it.z_lp);
        let mu = xz / nu;
        let denom = 1.0 + pobj.abs() + dobj.abs();
        gap = (xz.abs()).max((pobj - dobj).abs()) / denom;
        pinf = rp.norm() / (1.0 + b_norm);
        let rd_norm = (rd.iter().map(|m| m.norm_squared()).sum::<f64>() + rd_lp.norm_squared()).sqrt();
        dinf = rd_norm / (1.0 + c_norm);

        if !(gap.is_finite() && pinf.is_finite() && dinf.is_finite()) {
            status = SolverStatus::NumericalFailure;
            message = "non-finite iterate".into();
            break;
        }
        if gap <= opts.gap_tol && pinf <= opts.feas_tol && dinf <= opts.feas_tol {
            status = SolverStatus::Optimal;
            break;
        }
        // Farkas-type certificates on the current iterate.
        if dobj > 0.0 && (c_norm + rd_norm) / dobj < opts.feas_tol && dobj > 1e3 {
            status = SolverStatus::Infeasible;
            message = format!("dual ray with b^T y = {dobj:.3e}");
            break;
        }
        if pobj < 0.0 && (b_norm + rp.norm()) / -pobj < opts.feas_tol && -pobj > 1e3 {
            status = SolverStatus::Unbounded;
            message = format!("primal ray with <C, X> = {pobj:.3e}");
            break;
        }
        if iterations >= opts.max_iterations {
            status = SolverStatus::MaxIterations;
            break;
        }
        iterations += 1;

        // Factorizations.
        let mut zi = Vec::with_capacity(it.z.len());
        let mut xchol = Vec::with_capacity(it.x.len());
        let mut zchol = Vec::with_capacity(it.z.len());
        let mut ok = true;
        for b in 0..sf.dims.len() {
            match (cholesky(&it.x[b]), cholesky(&it.z[b])) {
                (Some(cx), Some(cz)) => {
                    zi.push(sym(&cz.inverse()));
                    xchol.push(cx.l());
                    zchol.push(cz.l());
                }
                _ => ok = false,
            }
        }
        if !ok {
            status = SolverStatus::NumericalFailure;
            message = "iterate left the cone".into();
            break;
        }
        let schur = op.schur(&it.x, &zi, &it.x_lp, &it.z_lp);
        let Some(chol) = factor_schur(schur) else {
            status = SolverStatus::NumericalFailure;
            message = "Schur complement is not positive definite".into();
            break;
        };

        let direction = |rc_zi: &[DMatrix<f64>], rc_lp: &DVector<f64>| -> Direction {
            // h = rp - A(Rc Z^-1) + A(X Rd Z^-1)
            let q: Vec<DMatrix<f64>> =
                (0..sf.dims.len()).map(|b| sym(&(&it.x[b] * &rd[b] * &zi[b] - &rc_zi[b]))).collect();
            let q_lp =
                DVector::from_iterator(sf.lp, (0..sf.lp).map(|l| (it.x_lp[l] * rd_lp[l] - rc_lp[l]) / it.z_lp[l]));
            let h = &rp + op.apply(&q, &q_lp);
            let dy = chol.solve(&h);
            let (atdy, atdy_lp) = op.adjoint(&dy);
            let dz: Vec<DMatrix<f64>> = (0..sf.dims.len()).map(|b| &rd[b] - &atdy[b]).collect();
            let dz_lp = &rd_lp - &atdy_lp;
            let dx: Vec<DMatrix<f64>> =
                (0..sf.dims.len()).map(|b| sym(&(&rc_zi[b] - &it.x[b] * &dz[b] * &zi[b]))).collect();
            let dx_lp =
                DVector::from_iterator(sf.lp, (0..sf.lp).map(|l| (rc_lp[l] - it.x_lp[l] * dz_lp[l]) / it.z_lp[l]));
            Direction { dx, dx_lp, dy, dz, dz_lp }
        };

        let steps = |d: &Direction| -> Option<(f64, f64)> {
            let mut ap = max_step_lp(&it.x_lp, &d.dx_lp);
            let mut ad = max_step_lp(&it.z_lp, &d.dz_lp);
            for b in 0..sf.dims.len() {
                ap = ap.min(max_step_psd(&xchol[b], &d.dx[b])?);
                ad = ad.min(max_step_psd(&zchol[b], &d.dz[b])?);
            }
            Some((ap, ad))
        };

        // Predictor.
        let rc_zi: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
        let rc_lp = -it.x_lp.component_mul(&it.z_lp);
        let pred = direction(&rc_zi, &rc_lp);
        let Some((ap, ad)) = steps(&pred) else {
            status = SolverStatus::NumericalFailure;
            message = "step length computation failed".into();
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut xz_aff = 0.0;
        for b in 0..sf.dims.len() {
            xz_aff += dot(&(&it.x[b] + &pred.dx[b] * ap), &(&it.z[b] + &pred.dz[b] * ad));
        }
        xz_aff += (&it.x_lp + &pred.dx_lp * ap).dot(&(&it.z_lp + &pred.dz_lp * ad));
        let ratio = (xz_aff / xz).clamp(0.0, 1.0);
        let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
        let sigma = ratio.powf(expon).min(1.0);

        // Corrector.
        let target = sigma * mu;
        let rc_zi: Vec<DMatrix<f64>> =
            (0..sf.dims.len()).map(|b| &zi[b] * target - &it.x[b] - &pred.dx[b] * &pred.dz[b] * &zi[b]).collect();
        let rc_lp = DVector::from_iterator(
            sf.lp,
            (0..sf.lp).map(|l| target - it.x_lp[l] * it.z_lp[l] - pred.dx_lp[l] * pred.dz_lp[l]),
        );
        let corr = direction(&rc_zi, &rc_lp);
        let Some((ap, ad)) = steps(&corr) else {
            status = SolverStatus::NumericalFailure;
            message = "step length computation failed".into();
            break;
        };
        let gamma = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);

        for b in 0..sf.dims.len() {
            it.x[b] += &corr.dx[b] * ap;
            it.z[b] += &corr.dz[b] * ad;
        }
        it.x_lp += &corr.dx_lp * ap;
        it.z_lp += &corr.dz_lp * ad;
        it.y += &corr.dy * ad;

        if ap.max(ad) < 1e-8 {
            stall += 1;
            if stall >= 3 {
                status = SolverStatus::NumericalFailure;
                message = "step lengths collapsed".into();
                break;
            }
        } else {
            stall = 0;
        }
    }

    IpmOutput { x: it.x, x_lp: it.x_lp, y: it.y, z: it.z, z_lp: it.z_lp, status, iterations, gap, pinf, dinf, message }
}
