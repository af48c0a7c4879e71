//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here is a thin layer over `nalgebra`. The one domain type is
//! [`HermitianMatrix`], which carries the symmetry invariant so downstream
//! code can take real traces and quadratic forms without re-checking.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance for the Hermitian symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// A matrix is treated as PSD when `lambda_min >= -PSD_TOL * lambda_max`.
pub const PSD_TOL: f64 = 1e-9;

const EIG_MAX_ITER: usize = 10_000;

/// Square complex matrix with `A = A^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

/// Eigenpairs in ascending eigenvalue order; column `i` of `vectors`
/// belongs to `values[i]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianMatrix {
    /// Wraps `m` after checking squareness and Hermitian symmetry.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims(format!("Hermitian matrix must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        let asym = (&m - m.adjoint()).norm();
        let scale = m.norm().max(f64::MIN_POSITIVE);
        if asym > HERMITIAN_TOL * scale && asym > f64::EPSILON {
            return Err(Error::invalid(format!("matrix is not Hermitian (||A - A^H||/||A|| = {:.3e})", asym / scale)));
        }
        Ok(Self::symmetrized(m))
    }

    /// Projects an arbitrary square matrix onto its Hermitian part.
    pub fn symmetrized(m: CMatrix) -> Self {
        assert!(m.is_square(), "symmetrized() needs a square matrix");
        let h = (&m + m.adjoint()).scale(0.5);
        Self(h)
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|v| C64::new(v, 0.0)))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    /// `v v^H`.
    pub fn outer(v: &CVector) -> Self {
        Self::symmetrized(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    /// Real inner product `Re tr(A B)`.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        trace_inner(&self.0, &other.0)
    }

    /// `v^H A v`, real by symmetry.
    pub fn quad_form(&self, v: &CVector) -> f64 {
        quad_form(&self.0, v)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn eigen(&self) -> Result<Eigen> {
        hermitian_eigen(&self.0)
    }

    pub fn min_max_eigenvalues(&self) -> Result<(f64, f64)> {
        let e = self.eigen()?;
        let n = e.values.len();
        Ok((e.values[0], e.values[n - 1]))
    }

    pub fn is_psd(&self) -> Result<bool> {
        let (lo, hi) = self.min_max_eigenvalues()?;
        Ok(lo >= -PSD_TOL * hi.max(0.0))
    }
}

/// `Re tr(A B)` without forming the product.
pub fn trace_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

pub fn quad_form(a: &CMatrix, v: &CVector) -> f64 {
    let av = a * v;
    v.iter().zip(av.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn hermitian_eigen(m: &CMatrix) -> Result<Eigen> {
    let n = m.nrows();
    if n == 0 || !m.is_square() {
        return Err(Error::dims("eigendecomposition needs a non-empty square matrix"));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NumericalFailure("non-finite matrix entry".into()));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Eigen { values, vectors })
}

/// Real symmetric eigenvalues, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(DVector::from_vec(v))
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}
