//! Invariant projector families, stable bases, block eigenvalues and the
//! Hamiltonian obstruction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, commutator, fro, herm_eig, identity, kron, r, Operator, Tolerance, C64};
use crate::model::{self, GeneratorSpec};
use crate::semigroup::{self, apply_generator, to_superoperator, Picture};

/// Complete family of mutually orthogonal projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorFamily {
    pub projectors: Vec<Operator>,
    pub ranks: Vec<usize>,
}

impl ProjectorFamily {
    pub fn new(projectors: Vec<Operator>, tol: Tolerance) -> Result<Self> {
        let Some(first) = projectors.first() else {
            return Err(Error::InvalidFamily("empty family".into()));
        };
        let n = first.nrows();
        let mut ranks = Vec::with_capacity(projectors.len());
        for p in &projectors {
            if p.nrows() != n || p.ncols() != n {
                return Err(Error::InvalidFamily(format!(
                    "projector of shape {}x{} in a family on dimension {n}",
                    p.nrows(),
                    p.ncols()
                )));
            }
            check_projector(p, tol)?;
            ranks.push(p.trace().re.round() as usize);
        }
        for i in 0..projectors.len() {
            for j in (i + 1)..projectors.len() {
                let overlap = fro(&(&projectors[i] * &projectors[j]));
                if !tol.accepts(overlap, 1.0) {
                    return Err(Error::InvalidFamily(format!(
                        "projectors {i} and {j} are not orthogonal (|P_i P_j| = {overlap:.3e})"
                    )));
                }
            }
        }
        let total = projectors.iter().fold(linalg::zeros(n), |acc, p| acc + p);
        let gap = fro(&(total - identity(n)));
        if !tol.accepts(gap, 1.0) {
            return Err(Error::InvalidFamily(format!(
                "projectors do not sum to the identity (residual {gap:.3e})"
            )));
        }
        Ok(ProjectorFamily { projectors, ranks })
    }

    /// Rank-one projectors onto the columns of a unitary.
    pub fn from_basis(u: &Operator) -> Self {
        let projectors = (0..u.ncols())
            .map(|k| {
                let v = u.column(k);
                &v * v.adjoint()
            })
            .collect();
        ProjectorFamily {
            projectors,
            ranks: vec![1; u.ncols()],
        }
    }

    pub fn dim(&self) -> usize {
        self.projectors.first().map_or(0, |p| p.nrows())
    }
}

fn check_projector(p: &Operator, tol: Tolerance) -> Result<()> {
    let residual = fro(&(p * p - p)).max(linalg::hermiticity_residual(p));
    if !tol.accepts(residual, 1.0) {
        return Err(Error::NotProjector { residual });
    }
    Ok(())
}

fn generator_scale(spec: &GeneratorSpec) -> f64 {
    fro(&spec.coupling_weight()) + fro(&spec.hamiltonian)
}

/// `𝓛(P) = 0`.
pub fn is_invariant_projector(spec: &GeneratorSpec, p: &Operator, tol: Tolerance) -> Result<bool> {
    if p.nrows() != spec.dim() || p.ncols() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "projector is {}x{}, generator acts on {}",
            p.nrows(),
            p.ncols(),
            spec.dim()
        )));
    }
    check_projector(p, tol)?;
    let residual = fro(&apply_generator(spec, p)?);
    Ok(tol.accepts(residual, generator_scale(spec)))
}

/// `H` and every `L_k` commute with every projector of the family.
pub fn family_commutant_check(
    spec: &GeneratorSpec,
    fam: &ProjectorFamily,
    tol: Tolerance,
) -> Result<bool> {
    if fam.dim() != spec.dim() {
        return Err(Error::InvalidFamily(format!(
            "family on dimension {} for generator on dimension {}",
            fam.dim(),
            spec.dim()
        )));
    }
    let ops = std::iter::once(&spec.hamiltonian).chain(&spec.couplings);
    for a in ops {
        for p in &fam.projectors {
            if !tol.accepts(fro(&commutator(p, a)), fro(a)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Orthonormal basis of the range of a projector.
fn range_basis(p: &Operator) -> Result<Vec<DVector<C64>>> {
    let (vals, vecs) = herm_eig(p, Tolerance::absolute(1e-6))?;
    Ok(vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.5)
        .map(|(k, _)| vecs.column(k).into_owned())
        .collect())
}

/// Every cross block `P_n X P_m` (`n ≠ m`) decays: the Heisenberg generator
/// restricted to it has spectral abscissa below `−abs_tol`.
pub fn is_dephasing_family(
    spec: &GeneratorSpec,
    fam: &ProjectorFamily,
    tol: Tolerance,
) -> Result<bool> {
    for (index, p) in fam.projectors.iter().enumerate() {
        if !is_invariant_projector(spec, p, tol)? {
            let residual = fro(&apply_generator(spec, p)?);
            return Err(Error::NotInvariant { index, residual });
        }
    }
    let sup = to_superoperator(spec, Picture::Heisenberg).matrix;
    let ranges: Vec<Vec<DVector<C64>>> = fam
        .projectors
        .iter()
        .map(range_basis)
        .collect::<Result<_>>()?;
    for (n, un) in ranges.iter().enumerate() {
        for (m, wm) in ranges.iter().enumerate() {
            if n == m || un.is_empty() || wm.is_empty() {
                continue;
            }
            // vec(u w†) = conj(w) ⊗ u
            let cols: Vec<DVector<C64>> = wm
                .iter()
                .flat_map(|w| {
                    un.iter().map(move |u| {
                        kron(
                            &Operator::from_column_slice(w.len(), 1, w.conjugate().as_slice()),
                            &Operator::from_column_slice(u.len(), 1, u.as_slice()),
                        )
                        .column(0)
                        .into_owned()
                    })
                })
                .collect();
            let q = DMatrix::from_columns(&cols);
            let restricted = q.adjoint() * &sup * &q;
            if linalg::spectral_abscissa(&restricted)? >= -tol.abs_tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Common eigenbasis of `H` and all `L_k`, columns ordered by the diagonal of
/// `H`, then by the coupling columns.
pub fn find_stable_basis(spec: &GeneratorSpec, tol: Tolerance) -> Result<Operator> {
    let mut family = vec![spec.hamiltonian.clone()];
    family.extend(spec.couplings.iter().cloned());
    Ok(linalg::simultaneous_diagonalize(&family, tol)?.unitary)
}

/// Diagonal coupling coefficients in a stable basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrixF {
    /// `d×N`, `f[(k, n)] = ⟨n|L_k|n⟩`.
    pub f: DMatrix<C64>,
    /// `ε_n = ⟨n|H|n⟩`.
    pub diag_h: Vec<f64>,
}

impl CouplingMatrixF {
    pub fn new(f: DMatrix<C64>, diag_h: Vec<f64>) -> Result<Self> {
        if f.ncols() != diag_h.len() && f.nrows() > 0 {
            return Err(Error::DimensionMismatch(format!(
                "F has {} columns but {} energies were given",
                f.ncols(),
                diag_h.len()
            )));
        }
        let n = diag_h.len();
        let f = if f.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            f
        };
        Ok(CouplingMatrixF { f, diag_h })
    }

    /// Builds `F` from columns `λ_n ∈ C^d`.
    pub fn from_columns(columns: &[Vec<C64>], diag_h: Vec<f64>) -> Result<Self> {
        let d = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != d) {
            return Err(Error::DimensionMismatch("ragged coupling columns".into()));
        }
        if columns.len() != diag_h.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns but {} energies",
                columns.len(),
                diag_h.len()
            )));
        }
        Self::new(
            DMatrix::from_fn(d, columns.len(), |k, n| columns[n][k]),
            diag_h,
        )
    }

    pub fn dim(&self) -> usize {
        self.diag_h.len()
    }

    pub fn multiplicity(&self) -> usize {
        self.f.nrows()
    }

    pub fn lambda(&self, n: usize) -> DVector<C64> {
        self.f.column(n).into_owned()
    }

    pub fn lambdas(&self) -> Vec<DVector<C64>> {
        (0..self.dim()).map(|n| self.lambda(n)).collect()
    }

    /// `⟨λ_n|λ_m⟩`.
    pub fn inner(&self, n: usize, m: usize) -> C64 {
        self.f.column(n).dotc(&self.f.column(m))
    }

    /// `Σ_n ‖λ_n‖²`, the natural scale of areas and obstructions.
    pub fn scale(&self) -> f64 {
        self.f.iter().map(|z| z.norm_sqr()).sum()
    }
}

pub fn coupling_matrix(
    spec: &GeneratorSpec,
    basis: &Operator,
    tol: Tolerance,
) -> Result<CouplingMatrixF> {
    let n = spec.dim();
    if basis.nrows() != n || basis.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "basis is {}x{}, expected {n}x{n}",
            basis.nrows(),
            basis.ncols()
        )));
    }
    let rotate = |a: &Operator| -> Result<Operator> {
        let b = basis.adjoint() * a * basis;
        let residual = linalg::off_diagonal_norm(&b);
        if !tol.accepts(residual, fro(a)) {
            return Err(Error::NotDiagonal { residual });
        }
        Ok(b)
    };
    let h = rotate(&spec.hamiltonian)?;
    let d = spec.multiplicity();
    let mut f = DMatrix::zeros(d, n);
    for (k, l) in spec.couplings.iter().enumerate() {
        let b = rotate(l)?;
        for j in 0..n {
            f[(k, j)] = b[(j, j)];
        }
    }
    CouplingMatrixF::new(f, (0..n).map(|j| h[(j, j)].re).collect())
}

/// `z_nm` and the quantities derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEigenvalues {
    pub z: DMatrix<C64>,
    /// `−Re z_nm = ½ Σ_k |λ_kn − λ_km|²`.
    pub gamma: DMatrix<f64>,
    /// `−Im z_nm = ε_m − ε_n − A_nm`.
    pub omega: DMatrix<f64>,
    /// `A_nm = Im⟨λ_n|λ_m⟩`.
    pub areas: DMatrix<f64>,
    /// `ε_m − ε_n + A_nm`, the frequency with the opposite sign convention for
    /// the area term.
    pub omega_alt: DMatrix<f64>,
}

pub fn block_eigenvalues(f: &CouplingMatrixF) -> BlockEigenvalues {
    let n = f.dim();
    let eps = &f.diag_h;
    let norms: Vec<f64> = (0..n).map(|j| f.inner(j, j).re).collect();
    let mut z = DMatrix::zeros(n, n);
    let mut areas = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let ip = f.inner(a, b);
            z[(a, b)] = ip - r(0.5 * (norms[a] + norms[b])) + C64::new(0.0, eps[a] - eps[b]);
            if a < b {
                areas[(a, b)] = ip.im;
                areas[(b, a)] = -ip.im;
            }
        }
    }
    let gamma = z.map(|v: C64| -v.re);
    let omega = z.map(|v: C64| -v.im);
    let omega_alt = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            0.0
        } else {
            eps[b] - eps[a] + areas[(a, b)]
        }
    });
    BlockEigenvalues {
        z,
        gamma,
        omega,
        areas,
        omega_alt,
    }
}

/// `Δ_nml = A_nm + A_ml + A_ln`.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstruction {
    n: usize,
    data: Vec<f64>,
}

impl Obstruction {
    pub fn from_areas(areas: &DMatrix<f64>) -> Self {
        let n = areas.nrows();
        let mut data = vec![0.0; n * n * n];
        // One evaluation per sorted triple; permutations copy it with their
        // sign so the symmetries hold exactly.
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    let v = areas[(a, b)] + areas[(b, c)] + areas[(c, a)];
                    for (i, j, k, sign) in [
                        (a, b, c, 1.0),
                        (b, c, a, 1.0),
                        (c, a, b, 1.0),
                        (b, a, c, -1.0),
                        (a, c, b, -1.0),
                        (c, b, a, -1.0),
                    ] {
                        data[(i * n + j) * n + k] = sign * v;
                    }
                }
            }
        }
        Obstruction { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.n + b) * self.n + c]
    }

    /// Largest `|Δ|` and the first (lexicographic, `n < m < l`) triple
    /// attaining it; `(0.0, (0, 1, 2))` when `N < 3`.
    pub fn max_abs(&self) -> (f64, (usize, usize, usize)) {
        let mut best = (0.0, (0, 1, 2));
        for a in 0..self.n {
            for b in (a + 1)..self.n {
                for c in (b + 1)..self.n {
                    let v = self.get(a, b, c).abs();
                    if v > best.0 {
                        best = (v, (a, b, c));
                    }
                }
            }
        }
        best
    }
}

pub fn obstruction(f: &CouplingMatrixF) -> Obstruction {
    Obstruction::from_areas(&block_eigenvalues(f).areas)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DephasingReport {
    pub stable_basis: Operator,
    pub coupling: CouplingMatrixF,
    pub blocks: BlockEigenvalues,
    pub delta: Obstruction,
    pub maximal: bool,
}

impl DephasingReport {
    pub fn from_basis(spec: &GeneratorSpec, basis: Operator, tol: Tolerance) -> Result<Self> {
        let coupling = coupling_matrix(spec, &basis, tol)?;
        let blocks = block_eigenvalues(&coupling);
        let delta = Obstruction::from_areas(&blocks.areas);
        let n = coupling.dim();
        let scale = coupling.scale();
        let maximal =
            (0..n).all(|a| (0..n).all(|b| a == b || blocks.gamma[(a, b)] > tol.bound(scale)));
        Ok(DephasingReport {
            stable_basis: basis,
            coupling,
            blocks,
            delta,
            maximal,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaximalDephasingVerdict {
    pub maximal: bool,
    /// Present whenever a stable basis exists.
    pub report: Option<DephasingReport>,
    pub reason: Option<String>,
}

pub fn is_maximally_dephasing(spec: &GeneratorSpec, tol: Tolerance) -> MaximalDephasingVerdict {
    let basis = match find_stable_basis(spec, tol) {
        Ok(u) => u,
        Err(e) => {
            return MaximalDephasingVerdict {
                maximal: false,
                report: None,
                reason: Some(format!("no stable basis: {e}")),
            }
        }
    };
    match DephasingReport::from_basis(spec, basis, tol) {
        Ok(report) => {
            let reason = (!report.maximal).then(|| {
                let n = report.coupling.dim();
                let pair = (0..n)
                    .flat_map(|a| ((a + 1)..n).map(move |b| (a, b)))
                    .find(|&(a, b)| {
                        report.blocks.gamma[(a, b)] <= tol.bound(report.coupling.scale())
                    })
                    .unwrap_or((0, 0));
                format!(
                    "coupling columns {} and {} coincide, no decay between them",
                    pair.0 + 1,
                    pair.1 + 1
                )
            });
            MaximalDephasingVerdict {
                maximal: report.maximal,
                report: Some(report),
                reason,
            }
        }
        Err(e) => MaximalDephasingVerdict {
            maximal: false,
            report: None,
            reason: Some(e.to_string()),
        },
    }
}

/// `d ≤ N − 1` for a minimal, maximally dephasing generator.
pub fn max_rank_check(
    spec: &GeneratorSpec,
    report: &DephasingReport,
    tol: Tolerance,
) -> Result<bool> {
    if !report.maximal {
        return Err(Error::NotApplicable(
            "generator is not maximally dephasing".into(),
        ));
    }
    if !model::couplings_minimal(&spec.couplings, spec.dim(), tol) {
        return Err(Error::NotApplicable("representation is not minimal".into()));
    }
    Ok(spec.multiplicity() + 1 <= spec.dim())
}

/// Equivalent generator with self-adjoint couplings, all diagonal in the
/// stable basis.
///
/// With `Δ ≡ 0` the areas split as `A_nm = A_1m − A_1n`; the energies absorb
/// that part (`ε′_n = ε_n − A_1n`), and the rates are reproduced by a real
/// configuration with the Gram matrix `Re⟨λ_n − λ_1|λ_m − λ_1⟩`.
pub fn self_adjoint_representation(spec: &GeneratorSpec, tol: Tolerance) -> Result<GeneratorSpec> {
    let verdict = is_maximally_dephasing(spec, tol);
    let report = match verdict {
        MaximalDephasingVerdict {
            maximal: true,
            report: Some(report),
            ..
        } => report,
        v => {
            return Err(Error::NotMaximallyDephasing(
                v.reason.unwrap_or_else(|| "no stable basis".into()),
            ))
        }
    };
    self_adjoint_from_report(spec, &report, tol)
}

pub(crate) fn self_adjoint_from_report(
    spec: &GeneratorSpec,
    report: &DephasingReport,
    tol: Tolerance,
) -> Result<GeneratorSpec> {
    let f = &report.coupling;
    let n = f.dim();
    let (max_delta, triple) = report.delta.max_abs();
    if max_delta > tol.bound(f.scale()) {
        return Err(Error::Obstructed { max_delta, triple });
    }
    let u = &report.stable_basis;
    let areas = &report.blocks.areas;
    let energies: Vec<f64> = (0..n).map(|j| f.diag_h[j] - areas[(0, j)]).collect();

    let mu: Vec<DVector<C64>> = (0..n).map(|j| f.lambda(j) - f.lambda(0)).collect();
    let gram = DMatrix::from_fn(n, n, |a, b| mu[a].dotc(&mu[b]).re);
    let eig = nalgebra::SymmetricEigen::new((&gram + gram.transpose()) * 0.5);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let mut modes: Vec<usize> = (0..n)
        .filter(|&k| eig.eigenvalues[k] > tol.bound(top))
        .collect();
    modes.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let couplings: Vec<Operator> = modes
        .iter()
        .map(|&k| {
            let s = eig.eigenvalues[k].sqrt();
            let entries: Vec<f64> = (0..n).map(|j| s * eig.eigenvectors[(j, k)]).collect();
            linalg::herm_part(&(u * linalg::diag_real(&entries) * u.adjoint()))
        })
        .collect();
    let h = linalg::herm_part(&(u * linalg::diag_real(&energies) * u.adjoint()));
    let out = GeneratorSpec::with_tolerance(couplings, h, tol)?;

    let distance = semigroup::generator_distance(spec, &out)?;
    let scale = fro(&to_superoperator(spec, Picture::Heisenberg).matrix).max(1.0);
    if distance > 1e-9 * scale {
        return Err(Error::NotApplicable(format!(
            "self-adjoint representation failed verification (distance {distance:.3e})"
        )));
    }
    Ok(out)
}
