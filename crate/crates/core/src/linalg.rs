//! Dense complex linear algebra on top of `nalgebra`.
//!
//! Every matrix-valued quantity in the crate (couplings, Hamiltonians,
//! density matrices, superoperators) is an [`Operator`]. Vectorization is
//! column-stacking throughout: `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[allow(non_camel_case_types)]
pub type C64 = Complex64;

/// Dense complex matrix. Storage is column-major; JSON uses row-major nested arrays.
pub type Operator = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Absolute/relative tolerance pair. A residual passes when it is at most
/// `abs_tol + rel_tol * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs_tol: 1e-9,
            rel_tol: 1e-12,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Result<Self> {
        if !abs_tol.is_finite() || !rel_tol.is_finite() {
            return Err(Error::InvalidTolerance("tolerances must be finite".into()));
        }
        if abs_tol < 0.0 || rel_tol < 0.0 {
            return Err(Error::InvalidTolerance(
                "tolerances must be nonnegative".into(),
            ));
        }
        if abs_tol == 0.0 && rel_tol == 0.0 {
            return Err(Error::InvalidTolerance(
                "at least one of abs_tol, rel_tol must be positive".into(),
            ));
        }
        Ok(Tolerance { abs_tol, rel_tol })
    }

    /// Absolute tolerance with the default relative part.
    pub fn absolute(abs_tol: f64) -> Self {
        Tolerance {
            abs_tol,
            ..Tolerance::default()
        }
    }

    #[inline]
    pub fn bound(&self, scale: f64) -> f64 {
        self.abs_tol + self.rel_tol * scale
    }

    #[inline]
    pub fn accepts(&self, residual: f64, scale: f64) -> bool {
        residual <= self.bound(scale)
    }
}

pub fn identity(n: usize) -> Operator {
    Operator::identity(n, n)
}

pub fn zeros(n: usize) -> Operator {
    Operator::zeros(n, n)
}

pub fn diag(entries: &[C64]) -> Operator {
    Operator::from_diagonal(&DVector::from_column_slice(entries))
}

pub fn diag_real(entries: &[f64]) -> Operator {
    Operator::from_diagonal(&DVector::from_iterator(
        entries.len(),
        entries.iter().map(|&x| r(x)),
    ))
}

/// Build an operator from row-major nested slices.
pub fn from_rows(rows: &[Vec<C64>]) -> Operator {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |row| row.len());
    Operator::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn commutator(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

pub fn anticommutator(a: &Operator, b: &Operator) -> Operator {
    a * b + b * a
}

/// Frobenius norm.
#[inline]
pub fn fro(a: &Operator) -> f64 {
    a.norm()
}

pub fn hermiticity_residual(a: &Operator) -> f64 {
    fro(&(a - a.adjoint()))
}

pub fn normality_residual(a: &Operator) -> f64 {
    let ad = a.adjoint();
    fro(&(a * &ad - &ad * a))
}

pub fn unitarity_residual(a: &Operator) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    fro(&(a.adjoint() * a - identity(a.nrows())))
}

pub fn off_diagonal_norm(a: &Operator) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j {
                acc += a[(i, j)].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

pub fn is_finite(a: &Operator) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Hermitian part `(A + A†)/2`.
pub fn herm_part(a: &Operator) -> Operator {
    (a + a.adjoint()) * r(0.5)
}

/// `(A − A†)/(2i)`, the operator imaginary part; Hermitian for any `A`.
pub fn im_part(a: &Operator) -> Operator {
    (a - a.adjoint()) / c(0.0, 2.0)
}

pub fn trace(a: &Operator) -> C64 {
    a.trace()
}

pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec_col(a: &Operator) -> DVector<C64> {
    DVector::from_column_slice(a.as_slice())
}

pub fn unvec_col(v: &DVector<C64>, n: usize) -> Operator {
    Operator::from_column_slice(n, n, v.as_slice())
}

fn require_square(a: &Operator, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

/// Hermitian eigendecomposition: ascending eigenvalues and a unitary whose
/// columns are the matching eigenvectors.
pub fn herm_eig(a: &Operator, tol: Tolerance) -> Result<(Vec<f64>, Operator)> {
    let n = require_square(a, "herm_eig input")?;
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let residual = hermiticity_residual(a);
    if !tol.accepts(residual, fro(a)) {
        return Err(Error::NotHermitian { residual });
    }
    if n == 0 {
        return Ok((Vec::new(), Operator::zeros(0, 0)));
    }
    let eig = SymmetricEigen::new(herm_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[x]
            .partial_cmp(&eig.eigenvalues[y])
            .unwrap_or(Ordering::Equal)
            .then(x.cmp(&y))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Operator::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Eigenvalues of a general square matrix via complex Schur form, sorted by
/// real part, then imaginary part.
pub fn eigenvalues(a: &Operator) -> Result<Vec<C64>> {
    let n = require_square(a, "eigenvalue input")?;
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = a.clone().schur().unpack();
    let mut values: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    values.sort_by(cmp_complex);
    Ok(values)
}

pub fn spectral_abscissa(a: &Operator) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

fn cmp_complex(a: &C64, b: &C64) -> Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
}

/// Matrix exponential (scaling-and-squaring with Padé approximants).
pub fn matrix_exp(a: &Operator) -> Result<Operator> {
    let n = require_square(a, "matrix_exp input")?;
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    if n == 0 {
        return Ok(Operator::zeros(0, 0));
    }
    Ok(a.exp())
}

/// `exp(−i·H·t)` for Hermitian `H` given its eigendecomposition.
pub fn unitary_from_spectrum(values: &[f64], vectors: &Operator, t: f64) -> Operator {
    let phases: Vec<C64> = values
        .iter()
        .map(|&e| C64::from_polar(1.0, -e * t))
        .collect();
    vectors * diag(&phases) * vectors.adjoint()
}

/// Singular value decomposition `a = U diag(values) V†` with `values`
/// nonincreasing; `U` is `m×m` and `V` is `n×n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub values: Vec<f64>,
    pub u: Operator,
    pub v: Operator,
}

/// Full SVD. Backed by `faer`: nalgebra's complex SVD loses accuracy on
/// rank-deficient input.
pub fn svd(a: &Operator) -> Result<Svd> {
    if !is_finite(a) {
        return Err(Error::NonFinite);
    }
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Svd {
            values: Vec::new(),
            u: identity(m),
            v: identity(n),
        });
    }
    let mat = faer::Mat::<C64>::from_fn(m, n, |i, j| a[(i, j)]);
    let dec = mat.svd().map_err(|_| Error::DegeneracyUnresolved {
        attempts: 1,
        residual: f64::NAN,
    })?;
    let s = dec.S().column_vector();
    Ok(Svd {
        values: (0..m.min(n)).map(|k| s[k].re).collect(),
        u: Operator::from_fn(m, m, |i, j| dec.U()[(i, j)]),
        v: Operator::from_fn(n, n, |i, j| dec.V()[(i, j)]),
    })
}

/// Real SVD, same conventions as [`svd`].
pub fn real_svd(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m == 0 || n == 0 {
        return Ok((Vec::new(), DMatrix::identity(m, m), DMatrix::identity(n, n)));
    }
    let mat = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let dec = mat.svd().map_err(|_| Error::DegeneracyUnresolved {
        attempts: 1,
        residual: f64::NAN,
    })?;
    let s = dec.S().column_vector();
    Ok((
        (0..m.min(n)).map(|k| s[k]).collect(),
        DMatrix::from_fn(m, m, |i, j| dec.U()[(i, j)]),
        DMatrix::from_fn(n, n, |i, j| dec.V()[(i, j)]),
    ))
}

pub fn singular_values(a: &Operator) -> Vec<f64> {
    svd(a).map(|s| s.values).unwrap_or_default()
}

/// Rank of the matrix whose rows are the given flattened vectors.
pub fn numerical_rank(vectors: &[DVector<C64>], tol: Tolerance) -> Result<usize> {
    let Some(first) = vectors.first() else {
        return Ok(0);
    };
    let len = first.len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != len) {
        return Err(Error::DimensionMismatch(format!(
            "vectors of length {len} and {} in rank test",
            bad.len()
        )));
    }
    let m = Operator::from_fn(vectors.len(), len, |i, j| vectors[i][j]);
    Ok(rank_of(&m, tol))
}

pub fn rank_of(m: &Operator, tol: Tolerance) -> usize {
    let sv = singular_values(m);
    let Some(&smax) = sv.first() else {
        return 0;
    };
    let cut = tol.bound(smax);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Orthonormal basis of the numerical kernel of `m`: right singular vectors
/// whose singular value is at most `abs_tol + rel_tol·σ_max`, smallest first.
pub fn null_space(m: &Operator, tol: Tolerance) -> Result<Vec<DVector<C64>>> {
    if !is_finite(m) {
        return Err(Error::NonFinite);
    }
    let ncols = m.ncols();
    if ncols == 0 {
        return Ok(Vec::new());
    }
    let dec = svd(m)?;
    let smax = dec.values.first().copied().unwrap_or(0.0);
    let cut = tol.bound(smax);
    // Columns of V past min(m, n) have singular value zero.
    let sigma = |k: usize| dec.values.get(k).copied().unwrap_or(0.0);
    Ok((0..ncols)
        .rev()
        .filter(|&k| sigma(k) <= cut)
        .map(|k| dec.v.column(k).into_owned())
        .collect())
}

/// Result of [`simultaneous_diagonalize`].
#[derive(Debug, Clone)]
pub struct SimultaneousDiagonalization {
    pub unitary: Operator,
    /// `diagonals[j][n] = (U† A_j U)_{nn}`.
    pub diagonals: Vec<Vec<C64>>,
}

const SIMDIAG_ATTEMPTS: usize = 4;

/// Common eigenbasis of a family of commuting normal matrices.
///
/// A random real combination of the Hermitian and anti-Hermitian parts is
/// diagonalized and every member is then checked for diagonality; up to three
/// retries with fresh coefficients are made. Columns are ordered
/// lexicographically by the family's diagonal entries (real part, then
/// imaginary part, ties by index). A family that is already diagonal keeps the
/// computational basis and its order.
pub fn simultaneous_diagonalize(
    family: &[Operator],
    tol: Tolerance,
) -> Result<SimultaneousDiagonalization> {
    let Some(first) = family.first() else {
        return Err(Error::DimensionMismatch("empty family".into()));
    };
    let n = require_square(first, "family member")?;
    for a in family {
        if require_square(a, "family member")? != n {
            return Err(Error::DimensionMismatch(format!(
                "family members of size {n} and {}",
                a.nrows()
            )));
        }
        if !is_finite(a) {
            return Err(Error::NonFinite);
        }
    }
    for (index, a) in family.iter().enumerate() {
        let residual = normality_residual(a);
        if !tol.accepts(residual, fro(a) * fro(a)) {
            return Err(Error::NotNormal { index, residual });
        }
    }
    for i in 0..family.len() {
        for j in (i + 1)..family.len() {
            let residual = fro(&commutator(&family[i], &family[j]));
            if !tol.accepts(residual, fro(&family[i]) * fro(&family[j])) {
                return Err(Error::NotCommuting {
                    first: i,
                    second: j,
                    residual,
                });
            }
        }
    }

    if family
        .iter()
        .all(|a| tol.accepts(off_diagonal_norm(a), fro(a)))
    {
        let diagonals = family
            .iter()
            .map(|a| (0..n).map(|k| a[(k, k)]).collect())
            .collect();
        return Ok(SimultaneousDiagonalization {
            unitary: identity(n),
            diagonals,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5157_4449_4147);
    let mut worst = f64::INFINITY;
    for _ in 0..SIMDIAG_ATTEMPTS {
        let mut combo = zeros(n);
        for a in family {
            let scale = fro(a).max(f64::MIN_POSITIVE);
            let ch: f64 = rng.random_range(-1.0..1.0);
            let ca: f64 = rng.random_range(-1.0..1.0);
            combo += herm_part(a) * r(ch / scale) + im_part(a) * r(ca / scale);
        }
        let (_, u) = herm_eig(&combo, Tolerance::default())?;
        let rotated: Vec<Operator> = family.iter().map(|a| u.adjoint() * a * &u).collect();
        let residual = rotated
            .iter()
            .zip(family)
            .map(|(b, a)| off_diagonal_norm(b) / tol.bound(fro(a)))
            .fold(0.0, f64::max);
        if residual <= 1.0 {
            return Ok(order_columns(u, family, tol));
        }
        worst = worst.min(residual);
    }
    Err(Error::DegeneracyUnresolved {
        attempts: SIMDIAG_ATTEMPTS,
        residual: worst,
    })
}

fn order_columns(u: Operator, family: &[Operator], tol: Tolerance) -> SimultaneousDiagonalization {
    let n = u.nrows();
    let raw: Vec<Vec<C64>> = family
        .iter()
        .map(|a| {
            let b = u.adjoint() * a * &u;
            (0..n).map(|k| b[(k, k)]).collect()
        })
        .collect();
    let eps: Vec<f64> = family.iter().map(|a| tol.bound(fro(a))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        for (j, d) in raw.iter().enumerate() {
            let (a, b) = (d[x], d[y]);
            if (a.re - b.re).abs() > eps[j] {
                return a.re.partial_cmp(&b.re).unwrap_or(Ordering::Equal);
            }
            if (a.im - b.im).abs() > eps[j] {
                return a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal);
            }
        }
        x.cmp(&y)
    });
    let mut unitary = Operator::from_fn(n, n, |i, j| u[(i, order[j])]);
    fix_column_phases(&mut unitary);
    let diagonals = raw
        .iter()
        .map(|d| order.iter().map(|&k| d[k]).collect())
        .collect();
    SimultaneousDiagonalization { unitary, diagonals }
}

/// Rotate each column so its first component of weight at least `1/n` is real
/// and positive.
pub fn fix_column_phases(u: &mut Operator) {
    let n = u.nrows();
    if n == 0 {
        return;
    }
    let threshold = 1.0 / n as f64 - 1e-9;
    for j in 0..u.ncols() {
        let pivot = (0..n)
            .find(|&i| u[(i, j)].norm_sqr() >= threshold)
            .unwrap_or(0);
        let z = u[(pivot, j)];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            for i in 0..n {
                u[(i, j)] *= phase;
            }
        }
    }
}
