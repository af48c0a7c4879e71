//! Complex-to-real embedding `X -> [[Re X, -Im X], [Im X, Re X]]`.
//!
//! The map is a *-algebra homomorphism, so eigenvalues of the image are
//! those of `X`, each doubled, and `tr(Φ(A) Φ(X)) = 2 Re tr(A X)`.

use nalgebra::DMatrix;

use super::{BlockId, ConicProblem, LinearConstraint, LmiConstraint, ScalarId, SdpField};
use crate::error::Result;
use crate::linalg::C64;

pub fn embed_hermitian(m: &DMatrix<C64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i + n, j)] = z.im;
            out[(i, j + n)] = -z.im;
        }
    }
    out
}

/// Left inverse of [`embed_hermitian`]; averages the two copies, which is
/// the orthogonal projection onto the image for arbitrary input.
pub fn unembed_symmetric(m: &DMatrix<f64>) -> DMatrix<C64> {
    let n = m.nrows() / 2;
    DMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(i + n, j + n)]);
        let im = 0.5 * (m[(i + n, j)] - m[(i, j + n)]);
        C64::new(re, im)
    })
}

/// Real symmetric problem with the same optimal value whose solutions map
/// back through [`unembed_symmetric`].
///
/// Coefficients are halved so that `<Φ(A)/2, Φ(X)> = Re tr(A X)`. No
/// structural constraints are needed: projecting any feasible real point
/// onto the image of the embedding keeps it feasible and preserves the
/// objective.
pub fn real_embedding(problem: &ConicProblem<C64>) -> Result<ConicProblem<f64>> {
    problem.validate()?;
    Ok(embed_problem(problem))
}

pub(crate) fn embed_problem<T: SdpField>(problem: &ConicProblem<T>) -> ConicProblem<f64> {
    let scale = 1.0 / T::EMBED as f64;
    let shrink = |m: &DMatrix<T>| T::embed(m) * scale;
    let mut out = ConicProblem::<f64>::new();
    for b in problem.blocks() {
        out.add_block(b.name.clone(), T::EMBED * b.dim);
    }
    for s in problem.scalars() {
        out.add_scalar(s.name.clone(), s.lower);
    }
    for (i, _) in problem.blocks().iter().enumerate() {
        if let Some(c) = problem.block_objective(BlockId(i)) {
            out.set_block_objective(BlockId(i), shrink(c));
        }
    }
    for (i, _) in problem.scalars().iter().enumerate() {
        out.set_scalar_objective(ScalarId(i), problem.scalar_objective(ScalarId(i)));
    }
    for c in problem.constraints() {
        out.add_constraint(LinearConstraint {
            name: c.name.clone(),
            block_terms: c.block_terms.iter().map(|(b, m)| (*b, shrink(m))).collect(),
            scalar_terms: c.scalar_terms.clone(),
            sense: c.sense,
            rhs: c.rhs,
        });
    }
    // x I - Φ(M)^T Φ(X) Φ(M) = Φ(x I - M^H X M): the real LMI is the image
    // of the complex one, with the embedded map.
    for l in problem.lmis() {
        out.add_lmi(LmiConstraint {
            name: l.name.clone(),
            scalar: l.scalar,
            block: l.block,
            map: T::embed_rect(&l.map),
        });
    }
    out
}

pub(crate) fn embed_rect(m: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for j in 0..c {
        for i in 0..r {
            let z = m[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i + r, j)] = z.im;
            out[(i, j + c)] = -z.im;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;

    #[test]
    fn pauli_y_embeds_to_doubled_spectrum() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
        );
        let e = symmetric_eigenvalues(&embed_hermitian(&m)).unwrap();
        let expect = [-1.0, -1.0, 1.0, 1.0];
        for (a, b) in e.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn embedding_is_multiplicative() {
        let a = DMatrix::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64, i as f64 - j as f64));
        let b = DMatrix::from_fn(3, 3, |i, j| C64::new(1.0 / (1 + i + j) as f64, (i * j) as f64));
        let lhs = embed_hermitian(&(&a * &b));
        let rhs = embed_hermitian(&a) * embed_hermitian(&b);
        assert!((lhs - rhs).norm() < 1e-12);
        assert!((embed_rect(&a) - embed_hermitian(&a)).norm() == 0.0);
    }
}
