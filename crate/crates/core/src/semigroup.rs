//! Lindblad generators, their duals and the semigroups they generate.
//!
//! Operators are vectorized by stacking columns, so
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, fro, herm_eig, identity, kron, r, unvec_col, vec_col, Operator, Tolerance, C64, I,
};
use crate::model::{self, GeneratorSpec, SlhTriple};
use crate::random;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Picture {
    /// Observables: `X ↦ 𝓛(X)`.
    Heisenberg,
    /// States: `ρ ↦ 𝓛*(ρ)`.
    Schrodinger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    pub dim: usize,
    pub matrix: Operator,
    pub picture: Picture,
}

impl Superoperator {
    pub fn apply(&self, x: &Operator) -> Result<Operator> {
        check_dim(x, self.dim)?;
        Ok(unvec_col(&(&self.matrix * vec_col(x)), self.dim))
    }

    pub fn spectral_abscissa(&self) -> Result<f64> {
        linalg::spectral_abscissa(&self.matrix)
    }

    /// `e^{t M}`.
    pub fn propagator(&self, t: f64) -> Result<Operator> {
        linalg::matrix_exp(&(&self.matrix * r(t)))
    }

    /// The same generator in the other picture.
    pub fn dual(&self) -> Superoperator {
        Superoperator {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
            picture: match self.picture {
                Picture::Heisenberg => Picture::Schrodinger,
                Picture::Schrodinger => Picture::Heisenberg,
            },
        }
    }
}

/// A validated density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: Operator,
}

impl DensityMatrix {
    pub fn new(rho: Operator, tol: Tolerance) -> Result<Self> {
        let n = rho.nrows();
        model::check_density(&rho, n, tol)?;
        Ok(DensityMatrix { rho })
    }

    pub fn maximally_mixed(n: usize) -> Self {
        DensityMatrix {
            rho: identity(n) * r(1.0 / n as f64),
        }
    }

    pub fn pure(psi: &nalgebra::DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState(
                "zero or non-finite state vector".into(),
            ));
        }
        let v = psi / r(norm);
        Ok(DensityMatrix {
            rho: &v * v.adjoint(),
        })
    }

    pub fn matrix(&self) -> &Operator {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn purity(&self) -> f64 {
        purity(&self.rho)
    }
}

pub fn purity(rho: &Operator) -> f64 {
    (rho * rho).trace().re
}

fn check_dim(x: &Operator, n: usize) -> Result<()> {
    if x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{}, generator acts on {n}x{n}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// `𝓛(X) = Σ L_k† X L_k − ½{L_k†L_k, X} − i[X, H]`.
pub fn apply_generator(spec: &GeneratorSpec, x: &Operator) -> Result<Operator> {
    check_dim(x, spec.dim())?;
    let mut out = (x * &spec.hamiltonian - &spec.hamiltonian * x) * (-I);
    for l in &spec.couplings {
        let ll = l.adjoint() * l;
        out += l.adjoint() * x * l - (&ll * x + x * &ll) * r(0.5);
    }
    Ok(out)
}

/// `𝓛*(ρ) = Σ L_k ρ L_k† − ½{L_k†L_k, ρ} + i[ρ, H]`.
pub fn apply_dual(spec: &GeneratorSpec, rho: &Operator) -> Result<Operator> {
    check_dim(rho, spec.dim())?;
    let mut out = (rho * &spec.hamiltonian - &spec.hamiltonian * rho) * I;
    for l in &spec.couplings {
        let ll = l.adjoint() * l;
        out += l * rho * l.adjoint() - (&ll * rho + rho * &ll) * r(0.5);
    }
    Ok(out)
}

/// `𝓓(X, Y) = 𝓛(XY) − 𝓛(X)Y − X𝓛(Y)`.
pub fn dissipator(spec: &GeneratorSpec, x: &Operator, y: &Operator) -> Result<Operator> {
    check_dim(y, spec.dim())?;
    let xy = x * y;
    Ok(apply_generator(spec, &xy)? - apply_generator(spec, x)? * y - x * apply_generator(spec, y)?)
}

pub fn to_superoperator(spec: &GeneratorSpec, picture: Picture) -> Superoperator {
    let n = spec.dim();
    let id = identity(n);
    let h = &spec.hamiltonian;
    let commutator = kron(&h.transpose(), &id) - kron(&id, h);
    let mut m = match picture {
        Picture::Heisenberg => commutator * (-I),
        Picture::Schrodinger => commutator * I,
    };
    for l in &spec.couplings {
        let ll = l.adjoint() * l;
        let anti = (kron(&id, &ll) + kron(&ll.transpose(), &id)) * r(0.5);
        let sandwich = match picture {
            Picture::Heisenberg => kron(&l.transpose(), &l.adjoint()),
            Picture::Schrodinger => kron(&l.conjugate(), l),
        };
        m += sandwich - anti;
    }
    Superoperator {
        dim: n,
        matrix: m,
        picture,
    }
}

/// Frobenius distance between the Heisenberg superoperators of two specs.
pub fn generator_distance(a: &GeneratorSpec, b: &GeneratorSpec) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "generators on dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let ma = to_superoperator(a, Picture::Heisenberg).matrix;
    let mb = to_superoperator(b, Picture::Heisenberg).matrix;
    Ok(fro(&(ma - mb)))
}

/// `X(t) = e^{t𝓛}(X0)` (or `e^{t𝓛*}` in the Schrödinger picture) at each time.
pub fn evolve(
    spec: &GeneratorSpec,
    x0: &Operator,
    times: &[f64],
    picture: Picture,
) -> Result<Vec<Operator>> {
    check_dim(x0, spec.dim())?;
    check_times(times)?;
    let sup = to_superoperator(spec, picture);
    let v0 = vec_col(x0);
    times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                Ok(x0.clone())
            } else {
                Ok(unvec_col(&(sup.propagator(t)? * &v0), spec.dim()))
            }
        })
        .collect()
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidConfig(
            "times must be finite and nonnegative".into(),
        ));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidConfig("times must be ascending".into()));
    }
    Ok(())
}

/// `Σ L_k†L_k = Σ L_kL_k†`.
pub fn is_bistochastic(spec: &GeneratorSpec, tol: Tolerance) -> bool {
    let n = spec.dim();
    let mut diff = linalg::zeros(n);
    let mut scale = 0.0;
    for l in &spec.couplings {
        diff += l.adjoint() * l - l * l.adjoint();
        scale += fro(l) * fro(l);
    }
    tol.accepts(fro(&diff), scale)
}

/// `tr(ρ_t²)` along the Schrödinger evolution of `rho0`.
pub fn purity_trajectory(
    spec: &GeneratorSpec,
    rho0: &DensityMatrix,
    times: &[f64],
) -> Result<Vec<f64>> {
    if rho0.dim() != spec.dim() {
        return Err(Error::InvalidState(format!(
            "state of dimension {} for generator of dimension {}",
            rho0.dim(),
            spec.dim()
        )));
    }
    Ok(evolve(spec, rho0.matrix(), times, Picture::Schrodinger)?
        .iter()
        .map(purity)
        .collect())
}

/// `d/dt tr(ρ_t²) = 2 tr(ρ 𝓛*(ρ))` at the given state.
pub fn purity_rate(spec: &GeneratorSpec, rho: &Operator) -> Result<f64> {
    Ok(2.0 * (rho * apply_dual(spec, rho)?).trace().re)
}

/// Choi matrix `Σ_ij |i⟩⟨j| ⊗ Φ(|i⟩⟨j|)` of a Schrödinger-picture map given
/// by its `N²×N²` matrix.
pub fn choi_matrix(map: &Operator, n: usize) -> Operator {
    let mut choi = Operator::zeros(n * n, n * n);
    for i in 0..n {
        for j in 0..n {
            let image = unvec_col(&map.column(i + j * n).into_owned(), n);
            choi.view_mut((i * n, j * n), (n, n)).copy_from(&image);
        }
    }
    choi
}

/// A pure stationary state with its residual diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PureStationaryState {
    pub vector: nalgebra::DVector<C64>,
    /// `‖𝓛*(|e⟩⟨e|)‖_F`.
    pub residual: f64,
    /// Largest `‖A e − ⟨e|A e⟩ e‖` over `A ∈ {K′, L′_k}` after centering.
    pub eigenvector_residual: f64,
    pub eigenvector_check: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport {
    /// Vectorized operators spanning the kernel of `𝓛*`.
    pub basis: Vec<nalgebra::DVector<C64>>,
    pub pure_states: Vec<PureStationaryState>,
    /// Pure-state search is skipped when the kernel is larger than `N`.
    pub searched_pure: bool,
}

impl StationaryReport {
    pub fn kernel_dim(&self) -> usize {
        self.basis.len()
    }

    /// The trace-normalized Hermitian stationary state when the kernel is
    /// one-dimensional.
    pub fn unique_state(&self, n: usize) -> Option<Operator> {
        if self.basis.len() != 1 {
            return None;
        }
        let b = unvec_col(&self.basis[0], n);
        let tr = b.trace();
        if tr.norm() < 1e-12 {
            return None;
        }
        Some(linalg::herm_part(&(b / tr)))
    }
}

const PURE_STATE_TOL: f64 = 1e-8;
const PURE_STATE_SEED: u64 = 0x5354_4154;

pub fn stationary_states(spec: &GeneratorSpec, tol: Tolerance) -> Result<StationaryReport> {
    let n = spec.dim();
    let sup = to_superoperator(spec, Picture::Schrodinger);
    let basis = linalg::null_space(&sup.matrix, tol)?;
    if basis.len() > n || n == 0 {
        return Ok(StationaryReport {
            basis,
            pure_states: Vec::new(),
            searched_pure: false,
        });
    }
    let scale = fro(&sup.matrix).max(1.0);
    let herm: Vec<Operator> = basis
        .iter()
        .flat_map(|b| {
            let x = unvec_col(b, n);
            [linalg::herm_part(&x), linalg::herm_part(&(x * (-I)))]
        })
        .filter(|h| fro(h) > 1e-12)
        .collect();
    let mut candidates = herm.clone();
    let mut rng = random::rng(PURE_STATE_SEED);
    let mut combo = linalg::zeros(n);
    for h in &herm {
        combo += h * r(rng.random_range(-1.0..1.0));
    }
    candidates.push(combo);

    let g = SlhTriple::from_spec(spec);
    let mut pure: Vec<PureStationaryState> = Vec::new();
    for h in &candidates {
        let (_, vectors) = herm_eig(h, tol)?;
        for k in 0..n {
            let v = vectors.column(k).into_owned();
            if pure.iter().any(|p| (p.vector.dotc(&v)).norm() > 1.0 - 1e-6) {
                continue;
            }
            let proj = &v * v.adjoint();
            let residual = fro(&apply_dual(spec, &proj)?);
            if residual > PURE_STATE_TOL * scale {
                continue;
            }
            let eigenvector_residual = eigenvector_residual(&g, &proj, &v, tol)?;
            pure.push(PureStationaryState {
                vector: v,
                residual,
                eigenvector_residual,
                eigenvector_check: eigenvector_residual <= PURE_STATE_TOL * scale,
            });
        }
    }
    Ok(StationaryReport {
        basis,
        pure_states: pure,
        searched_pure: true,
    })
}

/// Centers `g` at `|e⟩⟨e|` and measures how far `e` is from being a common
/// eigenvector of `K′` and the `L′_k`.
fn eigenvector_residual(
    g: &SlhTriple,
    proj: &Operator,
    e: &nalgebra::DVector<C64>,
    tol: Tolerance,
) -> Result<f64> {
    let (centered, _) = model::center(g, proj, tol)?;
    let k = model::complex_damping(&centered.generator_spec()?).0;
    let off = |a: &Operator| {
        let ae = a * e;
        let coeff = e.dotc(&ae);
        (ae - e * coeff).norm()
    };
    Ok(centered.couplings.iter().map(off).fold(off(&k), f64::max))
}
