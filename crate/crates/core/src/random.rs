//! Seeded random matrices and models, used by the test suites and the
//! property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, diag, diag_real, Operator, C64};
use crate::model::{EuclideanTransform, GeneratorSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Ginibre matrix (i.i.d. unit-variance complex Gaussian entries).
pub fn matrix<R: Rng>(rng: &mut R, n: usize) -> Operator {
    Operator::from_fn(n, n, |_, _| complex(rng))
}

pub fn hermitian<R: Rng>(rng: &mut R, n: usize) -> Operator {
    let g = matrix(rng, n);
    (&g + g.adjoint()) * c(0.5, 0.0)
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phase correction).
pub fn unitary<R: Rng>(rng: &mut R, n: usize) -> Operator {
    let qr = matrix(rng, n).qr();
    let (q, rr) = (qr.q(), qr.r());
    let phases: Vec<C64> = (0..n)
        .map(|k| {
            let d = rr[(k, k)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c(1.0, 0.0)
            }
        })
        .collect();
    q * diag(&phases)
}

/// Full-rank random density matrix.
pub fn density<R: Rng>(rng: &mut R, n: usize) -> Operator {
    let g = matrix(rng, n);
    let rho = &g * g.adjoint();
    let tr = rho.trace();
    rho / tr
}

/// Random generator with `d` Ginibre couplings of scale `scale` and a random
/// Hermitian Hamiltonian.
pub fn spec<R: Rng>(rng: &mut R, n: usize, d: usize, scale: f64) -> GeneratorSpec {
    let couplings = (0..d).map(|_| matrix(rng, n) * c(scale, 0.0)).collect();
    GeneratorSpec::new(couplings, hermitian(rng, n)).expect("random spec is valid")
}

/// Random generator whose couplings are Hermitian (hence bistochastic).
pub fn hermitian_spec<R: Rng>(rng: &mut R, n: usize, d: usize, scale: f64) -> GeneratorSpec {
    let couplings = (0..d).map(|_| hermitian(rng, n) * c(scale, 0.0)).collect();
    GeneratorSpec::new(couplings, hermitian(rng, n)).expect("random spec is valid")
}

/// Generator diagonal in the basis `basis` with the given coupling columns
/// (`columns[n]` is the vector of `λ_{k,n}` over channels `k`) and energies.
pub fn diagonal_spec(basis: &Operator, columns: &[Vec<C64>], energies: &[f64]) -> GeneratorSpec {
    let d = columns.first().map_or(0, |col| col.len());
    let couplings = (0..d)
        .map(|k| {
            let entries: Vec<C64> = columns.iter().map(|col| col[k]).collect();
            basis * diag(&entries) * basis.adjoint()
        })
        .collect();
    let h = basis * diag_real(energies) * basis.adjoint();
    let h = (&h + h.adjoint()) * c(0.5, 0.0);
    GeneratorSpec::new(couplings, h).expect("diagonal spec is valid")
}

/// Random complex coupling columns: `n` vectors in `C^d`.
pub fn complex_columns<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<C64>> {
    (0..n)
        .map(|_| (0..d).map(|_| complex(rng)).collect())
        .collect()
}

/// Random real coupling columns: `n` vectors in `R^d`.
pub fn real_columns<R: Rng>(rng: &mut R, n: usize, d: usize) -> Vec<Vec<C64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| c(rng.sample::<f64, _>(StandardNormal), 0.0))
                .collect()
        })
        .collect()
}

pub fn energies<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn euclidean_transform<R: Rng>(rng: &mut R, d: usize) -> EuclideanTransform {
    let t = unitary(rng, d);
    let beta = nalgebra::DVector::from_fn(d, |_, _| complex(rng));
    let e: f64 = rng.sample(StandardNormal);
    EuclideanTransform::new(t, beta, e).expect("random transform is valid")
}
