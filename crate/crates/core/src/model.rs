//! SLH triples, Lindblad generator data and their composition rules.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{
    self, fro, hermiticity_residual, identity, im_part, r, unitarity_residual, vec_col, Operator,
    Tolerance, C64,
};

/// The `(L, H)` data the Lindbladian depends on. Scattering never enters it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub couplings: Vec<Operator>,
    pub hamiltonian: Operator,
}

impl GeneratorSpec {
    pub fn new(couplings: Vec<Operator>, hamiltonian: Operator) -> Result<Self> {
        Self::with_tolerance(couplings, hamiltonian, Tolerance::default())
    }

    pub fn with_tolerance(
        couplings: Vec<Operator>,
        hamiltonian: Operator,
        tol: Tolerance,
    ) -> Result<Self> {
        let n = hamiltonian.nrows();
        if hamiltonian.ncols() != n {
            return Err(Error::DimensionMismatch(
                "Hamiltonian must be square".into(),
            ));
        }
        for (k, l) in couplings.iter().enumerate() {
            if l.nrows() != n || l.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "coupling {k} is {}x{}, expected {n}x{n}",
                    l.nrows(),
                    l.ncols()
                )));
            }
            if !linalg::is_finite(l) {
                return Err(Error::NonFinite);
            }
        }
        if !linalg::is_finite(&hamiltonian) {
            return Err(Error::NonFinite);
        }
        let residual = hermiticity_residual(&hamiltonian);
        if !tol.accepts(residual, fro(&hamiltonian)) {
            return Err(Error::NotHermitian { residual });
        }
        Ok(GeneratorSpec {
            couplings,
            hamiltonian,
        })
    }

    pub fn hamiltonian_only(hamiltonian: Operator) -> Result<Self> {
        Self::new(Vec::new(), hamiltonian)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn multiplicity(&self) -> usize {
        self.couplings.len()
    }

    /// `Σ_k L_k† L_k`.
    pub fn coupling_weight(&self) -> Operator {
        self.couplings
            .iter()
            .fold(linalg::zeros(self.dim()), |acc, l| acc + l.adjoint() * l)
    }
}

/// Scattering matrix, coupling vector and Hamiltonian of a unitary quantum
/// stochastic evolution. The scattering matrix is stored as a `(dN)×(dN)`
/// operator whose `(j, k)` block of size `N×N` is `S_jk`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlhTriple {
    pub dim: usize,
    pub scattering: Operator,
    pub couplings: Vec<Operator>,
    pub hamiltonian: Operator,
}

impl SlhTriple {
    /// Shape-checked constructor; numerical properties are left to [`validate`].
    pub fn new(
        scattering: Operator,
        couplings: Vec<Operator>,
        hamiltonian: Operator,
    ) -> Result<Self> {
        let n = hamiltonian.nrows();
        if hamiltonian.ncols() != n {
            return Err(Error::DimensionMismatch(
                "Hamiltonian must be square".into(),
            ));
        }
        let d = couplings.len();
        if scattering.nrows() != d * n || scattering.ncols() != d * n {
            return Err(Error::DimensionMismatch(format!(
                "scattering is {}x{}, expected {}x{}",
                scattering.nrows(),
                scattering.ncols(),
                d * n,
                d * n
            )));
        }
        if let Some(k) = couplings
            .iter()
            .position(|l| l.nrows() != n || l.ncols() != n)
        {
            return Err(Error::DimensionMismatch(format!(
                "coupling {k} is not {n}x{n}"
            )));
        }
        Ok(SlhTriple {
            dim: n,
            scattering,
            couplings,
            hamiltonian,
        })
    }

    pub fn with_identity_scattering(
        couplings: Vec<Operator>,
        hamiltonian: Operator,
    ) -> Result<Self> {
        let n = hamiltonian.nrows();
        Self::new(identity(couplings.len() * n), couplings, hamiltonian)
    }

    pub fn from_spec(spec: &GeneratorSpec) -> Self {
        Self::with_identity_scattering(spec.couplings.clone(), spec.hamiltonian.clone())
            .expect("a generator spec has consistent shapes")
    }

    /// The trivial triple of dimension `n` with no channels and `H = 0`.
    pub fn empty(n: usize) -> Self {
        Self::with_identity_scattering(Vec::new(), linalg::zeros(n)).expect("shapes agree")
    }

    pub fn multiplicity(&self) -> usize {
        self.couplings.len()
    }

    pub fn scattering_block(&self, j: usize, k: usize) -> Operator {
        let n = self.dim;
        self.scattering.view((j * n, k * n), (n, n)).into_owned()
    }

    /// Couplings stacked into a `(dN)×N` block column.
    fn coupling_column(&self) -> Operator {
        let n = self.dim;
        let d = self.multiplicity();
        let mut col = Operator::zeros(d * n, n);
        for (k, l) in self.couplings.iter().enumerate() {
            col.view_mut((k * n, 0), (n, n)).copy_from(l);
        }
        col
    }

    fn from_column(
        dim: usize,
        scattering: Operator,
        column: &Operator,
        hamiltonian: Operator,
    ) -> Self {
        let d = column.nrows() / dim.max(1);
        let couplings = (0..d)
            .map(|k| column.view((k * dim, 0), (dim, dim)).into_owned())
            .collect();
        SlhTriple {
            dim,
            scattering,
            couplings,
            hamiltonian,
        }
    }

    /// The generator data. Raises `NotHermitian` if `H` is not Hermitian.
    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        GeneratorSpec::new(self.couplings.clone(), self.hamiltonian.clone())
    }
}

/// Residual diagnostics for a triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub dim: usize,
    pub multiplicity: usize,
    pub unitarity_residual: f64,
    pub hermiticity_residual: f64,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn validate(g: &SlhTriple, tol: Tolerance) -> ValidationReport {
    let mut failures = Vec::new();
    let n = g.dim;
    let d = g.multiplicity();
    if g.scattering.nrows() != d * n || g.scattering.ncols() != d * n {
        failures.push(format!(
            "scattering is {}x{}, expected {}x{}",
            g.scattering.nrows(),
            g.scattering.ncols(),
            d * n,
            d * n
        ));
    }
    for (k, l) in g.couplings.iter().enumerate() {
        if l.nrows() != n || l.ncols() != n {
            failures.push(format!(
                "coupling {k} is {}x{}, expected {n}x{n}",
                l.nrows(),
                l.ncols()
            ));
        }
    }
    let finite = linalg::is_finite(&g.scattering)
        && linalg::is_finite(&g.hamiltonian)
        && g.couplings.iter().all(linalg::is_finite);
    if !finite {
        failures.push("non-finite entries".into());
    }
    let unitarity = unitarity_residual(&g.scattering);
    if !tol.accepts(unitarity, (d * n) as f64) {
        failures.push(format!("scattering not unitary (residual {unitarity:.3e})"));
    }
    let herm = if g.hamiltonian.nrows() == g.hamiltonian.ncols() {
        hermiticity_residual(&g.hamiltonian)
    } else {
        f64::INFINITY
    };
    if !tol.accepts(herm, fro(&g.hamiltonian)) {
        failures.push(format!("Hamiltonian not Hermitian (residual {herm:.3e})"));
    }
    ValidationReport {
        dim: n,
        multiplicity: d,
        unitarity_residual: unitarity,
        hermiticity_residual: herm,
        failures,
    }
}

/// Series product: `first` feeds into `second`.
///
/// Returns `(S₂S₁, S₂L₁ + L₂, H₁ + H₂ + Im{L₂† S₂ L₁})` with
/// `Im{M} = (M − M†)/(2i)`. Both Hamiltonians are kept.
pub fn series_product(first: &SlhTriple, second: &SlhTriple) -> Result<SlhTriple> {
    if first.dim != second.dim || first.multiplicity() != second.multiplicity() {
        return Err(Error::DimensionMismatch(format!(
            "series product of (N={}, d={}) and (N={}, d={})",
            first.dim,
            first.multiplicity(),
            second.dim,
            second.multiplicity()
        )));
    }
    let l1 = first.coupling_column();
    let l2 = second.coupling_column();
    let s2l1 = &second.scattering * &l1;
    let scattering = &second.scattering * &first.scattering;
    let column = &s2l1 + &l2;
    let hamiltonian = &first.hamiltonian + &second.hamiltonian + im_part(&(l2.adjoint() * &s2l1));
    Ok(SlhTriple::from_column(
        first.dim,
        scattering,
        &column,
        hamiltonian,
    ))
}

/// Concatenation (parallel) product: block-diagonal scattering, stacked
/// couplings, summed Hamiltonians.
pub fn concatenation(g1: &SlhTriple, g2: &SlhTriple) -> Result<SlhTriple> {
    if g1.dim != g2.dim {
        return Err(Error::DimensionMismatch(format!(
            "concatenation of systems of size {} and {}",
            g1.dim, g2.dim
        )));
    }
    let (m1, m2) = (g1.scattering.nrows(), g2.scattering.nrows());
    let mut scattering = Operator::zeros(m1 + m2, m1 + m2);
    scattering
        .view_mut((0, 0), (m1, m1))
        .copy_from(&g1.scattering);
    scattering
        .view_mut((m1, m1), (m2, m2))
        .copy_from(&g2.scattering);
    let couplings = g1.couplings.iter().chain(&g2.couplings).cloned().collect();
    SlhTriple::new(scattering, couplings, &g1.hamiltonian + &g2.hamiltonian)
}

/// Scalar gauge data `(T, β, e)`: `T` a `d×d` unitary, `β ∈ C^d`, `e` real.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanTransform {
    pub t: Operator,
    pub beta: DVector<C64>,
    pub e: f64,
}

impl EuclideanTransform {
    pub fn new(t: Operator, beta: DVector<C64>, e: f64) -> Result<Self> {
        let d = t.nrows();
        if t.ncols() != d || beta.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "transform with T {}x{} and beta of length {}",
                t.nrows(),
                t.ncols(),
                beta.len()
            )));
        }
        let residual = unitarity_residual(&t);
        if !Tolerance::default().accepts(residual, d as f64) {
            return Err(Error::InvalidModel(format!(
                "T is not unitary (residual {residual:.3e})"
            )));
        }
        if !e.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(EuclideanTransform { t, beta, e })
    }

    pub fn identity(d: usize) -> Self {
        EuclideanTransform {
            t: identity(d),
            beta: DVector::zeros(d),
            e: 0.0,
        }
    }

    pub fn shift(beta: DVector<C64>, e: f64) -> Self {
        EuclideanTransform {
            t: identity(beta.len()),
            beta,
            e,
        }
    }

    pub fn multiplicity(&self) -> usize {
        self.t.nrows()
    }

    /// The scalar triple `(T ⊗ 1, β ⊗ 1, e·1)` on an `n`-dimensional system.
    pub fn scalar_triple(&self, n: usize) -> SlhTriple {
        let id = identity(n);
        let scattering = linalg::kron(&self.t, &id);
        let couplings = self.beta.iter().map(|&b| &id * b).collect();
        SlhTriple {
            dim: n,
            scattering,
            couplings,
            hamiltonian: &id * r(self.e),
        }
    }
}

/// `G′ = G ◁ (T, β, e)`:
/// `S′ = TS`, `L′ = TL + β`, `H′ = H + e + Im{β† T L}`.
pub fn euclidean_transform(g: &SlhTriple, e: &EuclideanTransform) -> Result<SlhTriple> {
    if e.multiplicity() != g.multiplicity() {
        return Err(Error::DimensionMismatch(format!(
            "transform of multiplicity {} applied to triple of multiplicity {}",
            e.multiplicity(),
            g.multiplicity()
        )));
    }
    series_product(g, &e.scalar_triple(g.dim))
}

/// Applies a transform to bare generator data.
pub fn transform_spec(spec: &GeneratorSpec, e: &EuclideanTransform) -> Result<GeneratorSpec> {
    euclidean_transform(&SlhTriple::from_spec(spec), e)?.generator_spec()
}

/// Complex damping operator `K = −½ Σ L_k† L_k − iH`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingOperator(pub Operator);

impl DampingOperator {
    /// Residual of `K + K† = −Σ L_k† L_k`.
    pub fn residual(&self, spec: &GeneratorSpec) -> f64 {
        fro(&(&self.0 + self.0.adjoint() + spec.coupling_weight()))
    }
}

pub fn complex_damping(spec: &GeneratorSpec) -> DampingOperator {
    DampingOperator(spec.coupling_weight() * r(-0.5) - &spec.hamiltonian * linalg::I)
}

/// Centers a triple with respect to the state `rho`: `tr(ρL′_k) = 0` and
/// `tr(ρH′) = 0`. Returns the centered triple and the transform used.
pub fn center(
    g: &SlhTriple,
    rho: &Operator,
    tol: Tolerance,
) -> Result<(SlhTriple, EuclideanTransform)> {
    check_density(rho, g.dim, tol)?;
    let beta = DVector::from_iterator(
        g.multiplicity(),
        g.couplings.iter().map(|l| -(rho * l).trace()),
    );
    let shifted = euclidean_transform(g, &EuclideanTransform::shift(beta.clone(), 0.0))?;
    let e = -(rho * &shifted.hamiltonian).trace().re;
    let transform = EuclideanTransform::shift(beta, e);
    let centered = euclidean_transform(g, &transform)?;
    Ok((centered, transform))
}

pub(crate) fn check_density(rho: &Operator, n: usize, tol: Tolerance) -> Result<()> {
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::InvalidState(format!(
            "state is {}x{}, expected {n}x{n}",
            rho.nrows(),
            rho.ncols()
        )));
    }
    if !linalg::is_finite(rho) {
        return Err(Error::InvalidState("non-finite entries".into()));
    }
    let herm = hermiticity_residual(rho);
    if !tol.accepts(herm, 1.0) {
        return Err(Error::InvalidState(format!(
            "not Hermitian (residual {herm:.3e})"
        )));
    }
    let tr = rho.trace();
    if !tol.accepts((tr - 1.0).norm(), 1.0) {
        return Err(Error::InvalidState(format!("trace {tr} != 1")));
    }
    let (vals, _) = linalg::herm_eig(rho, tol)?;
    if let Some(&min) = vals.first() {
        if min < -tol.bound(1.0) {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (eigenvalue {min:.3e})"
            )));
        }
    }
    Ok(())
}

/// `{1, L_1, …, L_d}` linearly independent.
pub fn is_minimal(g: &SlhTriple, tol: Tolerance) -> bool {
    couplings_minimal(&g.couplings, g.dim, tol)
}

pub(crate) fn couplings_minimal(couplings: &[Operator], n: usize, tol: Tolerance) -> bool {
    let mut rows = vec![vec_col(&identity(n))];
    rows.extend(couplings.iter().map(vec_col));
    linalg::numerical_rank(&rows, tol).map_or(false, |rank| rank == couplings.len() + 1)
}

/// Minimal representation of the same generator: identity components are
/// absorbed by a shift (which corrects `H`), then the traceless parts are
/// compressed with an SVD. Scattering of the result is the identity.
pub fn reduce_to_minimal(g: &SlhTriple, tol: Tolerance) -> Result<(SlhTriple, usize)> {
    let n = g.dim;
    let d = g.multiplicity();
    if n == 0 || d == 0 {
        let out = SlhTriple::with_identity_scattering(Vec::new(), g.hamiltonian.clone())?;
        return Ok((out, 0));
    }
    let beta = DVector::from_iterator(d, g.couplings.iter().map(|l| -l.trace() / n as f64));
    let plain = SlhTriple::with_identity_scattering(g.couplings.clone(), g.hamiltonian.clone())?;
    let shifted = euclidean_transform(&plain, &EuclideanTransform::shift(beta, 0.0))?;

    // Rows are the flattened traceless couplings.
    let rows = Operator::from_fn(d, n * n, |k, j| shifted.couplings[k].as_slice()[j]);
    let dec = linalg::svd(&rows)?;
    let smax = dec.values.first().copied().unwrap_or(0.0);
    let cut = tol.bound(smax);
    // Row k of V† scaled by σ_k; values are already nonincreasing.
    let couplings: Vec<Operator> = dec
        .values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(k, &s)| {
            let row: Vec<C64> = dec.v.column(k).iter().map(|z| z.conj() * s).collect();
            Operator::from_column_slice(n, n, &row)
        })
        .collect();
    let rank = couplings.len();
    let out = SlhTriple::with_identity_scattering(couplings, shifted.hamiltonian)?;
    Ok((out, rank))
}

/// Block matrix of scattering entries from a `d×d` scalar matrix.
pub fn scalar_scattering(t: &Operator, n: usize) -> Operator {
    linalg::kron(t, &identity(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diag_real, from_rows, ONE, ZERO};
    use crate::random;
    use crate::semigroup::{to_superoperator, Picture};

    fn sz() -> Operator {
        diag_real(&[1.0, -1.0])
    }
    fn sm() -> Operator {
        from_rows(&[vec![ZERO, ONE], vec![ZERO, ZERO]])
    }

    fn superop_distance(a: &GeneratorSpec, b: &GeneratorSpec) -> f64 {
        let ma = to_superoperator(a, Picture::Heisenberg).matrix;
        let mb = to_superoperator(b, Picture::Heisenberg).matrix;
        fro(&(ma - mb))
    }

    #[test]
    fn validate_examples() {
        let tol = Tolerance::default();
        let g =
            SlhTriple::with_identity_scattering(vec![sz() * r(0.7f64.sqrt())], linalg::zeros(2))
                .unwrap();
        assert!(validate(&g, tol).passed());

        let bad_h = SlhTriple::with_identity_scattering(vec![], sm().transpose()).unwrap();
        let report = validate(&bad_h, tol);
        assert!(!report.passed());
        assert!(report.failures[0].contains("Hermitian"));

        let bad_s = SlhTriple::new(identity(2) * r(2.0), vec![sz()], linalg::zeros(2)).unwrap();
        let report = validate(&bad_s, tol);
        assert!(report.failures.iter().any(|f| f.contains("unitary")));
    }

    #[test]
    fn series_of_hamiltonian_only_triples_adds_hamiltonians() {
        let mut rng = random::rng(1);
        let h1 = random::hermitian(&mut rng, 3);
        let h2 = random::hermitian(&mut rng, 3);
        let zero = linalg::zeros(3);
        let g1 = SlhTriple::with_identity_scattering(vec![zero.clone()], h1.clone()).unwrap();
        let g2 = SlhTriple::with_identity_scattering(vec![zero.clone()], h2.clone()).unwrap();
        let g = series_product(&g1, &g2).unwrap();
        assert!(fro(&(g.hamiltonian - (h1 + h2))) < 1e-14);
        assert!(fro(&g.couplings[0]) < 1e-14);
        assert!(fro(&(g.scattering - identity(3))) < 1e-14);
    }

    #[test]
    fn series_with_scalar_triple_matches_componentwise_formulas() {
        let mut rng = random::rng(2);
        let (n, d) = (3, 2);
        let couplings: Vec<Operator> = (0..d).map(|_| random::matrix(&mut rng, n)).collect();
        let h = random::hermitian(&mut rng, n);
        let s = random::unitary(&mut rng, n * d);
        let g = SlhTriple::new(s.clone(), couplings.clone(), h.clone()).unwrap();
        let e = random::euclidean_transform(&mut rng, d);
        let out = euclidean_transform(&g, &e).unwrap();

        for j in 0..d {
            for k in 0..d {
                let mut expect = linalg::zeros(n);
                for l in 0..d {
                    expect += g.scattering_block(l, k) * e.t[(j, l)];
                }
                assert!(fro(&(out.scattering_block(j, k) - expect)) < 1e-12);
            }
            let mut expect = identity(n) * e.beta[j];
            for l in 0..d {
                expect += &couplings[l] * e.t[(j, l)];
            }
            assert!(fro(&(&out.couplings[j] - expect)) < 1e-12);
        }
        let mut correction = linalg::zeros(n);
        for j in 0..d {
            for k in 0..d {
                correction += &couplings[k] * (e.beta[j].conj() * e.t[(j, k)])
                    - couplings[j].adjoint() * (e.t[(k, j)].conj() * e.beta[k]);
            }
        }
        let expect_h = &h + identity(n) * r(e.e) + correction / c(0.0, 2.0);
        assert!(fro(&(&out.hamiltonian - expect_h)) < 1e-12);

        // K′ − K = −Σ β_j* T_jk L_k − (½Σ|β_k|² + ie) 1
        let spec = g.generator_spec().unwrap();
        let spec2 = out.generator_spec().unwrap();
        let dk = complex_damping(&spec2).0 - complex_damping(&spec).0;
        let mut expect_dk = linalg::zeros(n);
        for j in 0..d {
            for k in 0..d {
                expect_dk -= &couplings[k] * (e.beta[j].conj() * e.t[(j, k)]);
            }
        }
        let beta_sq: f64 = e.beta.iter().map(|b| b.norm_sqr()).sum();
        expect_dk -= identity(n) * c(0.5 * beta_sq, e.e);
        assert!(fro(&(dk - expect_dk)) < 1e-12);
    }

    #[test]
    fn series_product_is_associative() {
        let mut rng = random::rng(3);
        let (n, d) = (2, 2);
        let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
            SlhTriple::new(
                random::unitary(rng, n * d),
                (0..d).map(|_| random::matrix(rng, n)).collect(),
                random::hermitian(rng, n),
            )
            .unwrap()
        };
        let (a, b, cc) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        let left = series_product(&series_product(&a, &b).unwrap(), &cc).unwrap();
        let right = series_product(&a, &series_product(&b, &cc).unwrap()).unwrap();
        assert!(fro(&(&left.scattering - &right.scattering)) < 1e-12);
        for (x, y) in left.couplings.iter().zip(&right.couplings) {
            assert!(fro(&(x - y)) < 1e-12);
        }
        assert!(fro(&(&left.hamiltonian - &right.hamiltonian)) < 1e-12);
    }

    #[test]
    fn series_product_rejects_mismatched_shapes() {
        let a = SlhTriple::with_identity_scattering(vec![sz()], linalg::zeros(2)).unwrap();
        let b = SlhTriple::with_identity_scattering(vec![sz(), sz()], linalg::zeros(2)).unwrap();
        assert!(matches!(
            series_product(&a, &b),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn concatenation_builds_depolarizing_and_adds_generators() {
        let sx = from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]);
        let sy = from_rows(&[vec![ZERO, c(0.0, -1.0)], vec![c(0.0, 1.0), ZERO]]);
        let rates = [0.3f64, 0.5, 0.7];
        let parts: Vec<SlhTriple> = [sx, sy, sz()]
            .iter()
            .zip(rates)
            .map(|(s, g)| {
                SlhTriple::with_identity_scattering(vec![s * r(g.sqrt())], linalg::zeros(2))
                    .unwrap()
            })
            .collect();
        let all = concatenation(&concatenation(&parts[0], &parts[1]).unwrap(), &parts[2]).unwrap();
        assert_eq!(all.multiplicity(), 3);
        assert!(validate(&all, Tolerance::default()).passed());

        let sum: Operator = parts
            .iter()
            .map(|p| to_superoperator(&p.generator_spec().unwrap(), Picture::Heisenberg).matrix)
            .fold(Operator::zeros(4, 4), |acc, m| acc + m);
        let total = to_superoperator(&all.generator_spec().unwrap(), Picture::Heisenberg).matrix;
        assert!(fro(&(total - sum)) < 1e-12);

        let with_empty = concatenation(&all, &SlhTriple::empty(2)).unwrap();
        assert_eq!(with_empty, all);

        assert!(matches!(
            concatenation(&all, &SlhTriple::empty(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn euclidean_identity_and_shift() {
        let gamma: f64 = 0.8;
        let g = SlhTriple::with_identity_scattering(vec![sz() * r(gamma.sqrt())], linalg::zeros(2))
            .unwrap();
        let same = euclidean_transform(&g, &EuclideanTransform::identity(1)).unwrap();
        assert!(fro(&(&same.couplings[0] - &g.couplings[0])) < 1e-15);
        assert!(fro(&same.hamiltonian) < 1e-15);

        let beta = DVector::from_element(1, c(0.4, -1.1));
        let shifted =
            euclidean_transform(&g, &EuclideanTransform::shift(beta.clone(), 0.0)).unwrap();
        assert!(fro(&(&shifted.couplings[0] - (&g.couplings[0] + identity(2) * beta[0]))) < 1e-15);
        assert!(
            superop_distance(
                &g.generator_spec().unwrap(),
                &shifted.generator_spec().unwrap()
            ) < 1e-12
        );
    }

    #[test]
    fn complex_damping_examples() {
        let gamma: f64 = 0.6;
        let deph = GeneratorSpec::new(vec![sz() * r(gamma.sqrt())], linalg::zeros(2)).unwrap();
        let k = complex_damping(&deph);
        assert!(fro(&(&k.0 + identity(2) * r(gamma / 2.0))) < 1e-15);

        let ad = GeneratorSpec::new(vec![sm() * r(gamma.sqrt())], linalg::zeros(2)).unwrap();
        let k = complex_damping(&ad);
        assert!(fro(&(&k.0 - diag_real(&[0.0, -gamma / 2.0]))) < 1e-15);
        assert!(k.residual(&ad) < 1e-15);

        let mut rng = random::rng(4);
        let h = random::hermitian(&mut rng, 3);
        let k = complex_damping(&GeneratorSpec::hamiltonian_only(h.clone()).unwrap());
        assert!(fro(&(&k.0 + &h * linalg::I)) < 1e-15);
    }

    #[test]
    fn centering_examples() {
        let tol = Tolerance::default();
        let g = SlhTriple::with_identity_scattering(vec![sz()], linalg::zeros(2)).unwrap();
        let (centered, e) = center(&g, &(identity(2) * r(0.5)), tol).unwrap();
        assert!(e.beta[0].norm() < 1e-15 && e.e.abs() < 1e-15);
        assert!(fro(&(&centered.couplings[0] - sz())) < 1e-15);

        // σ_z = diag(1, −1): ⟨e_0|σ_z|e_0⟩ = 1, ⟨e_1|σ_z|e_1⟩ = −1.
        let (centered, e) = center(&g, &diag_real(&[1.0, 0.0]), tol).unwrap();
        assert!((e.beta[0] + 1.0).norm() < 1e-15);
        assert!(fro(&(&centered.couplings[0] - (sz() - identity(2)))) < 1e-15);

        let (centered, e) = center(&g, &diag_real(&[0.0, 1.0]), tol).unwrap();
        assert!((e.beta[0] - 1.0).norm() < 1e-15);
        assert!(fro(&(&centered.couplings[0] - (sz() + identity(2)))) < 1e-15);

        assert!(matches!(
            center(&g, &diag_real(&[0.7, 0.7]), tol),
            Err(Error::InvalidState(_))
        ));
        assert!(matches!(
            center(&g, &diag_real(&[1.5, -0.5]), tol),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn centering_random_triples() {
        let tol = Tolerance::default();
        let mut rng = random::rng(5);
        for _ in 0..10 {
            let spec = random::spec(&mut rng, 3, 2, 1.0);
            let g = SlhTriple::from_spec(&spec);
            let rho = random::density(&mut rng, 3);
            let (centered, e) = center(&g, &rho, tol).unwrap();
            assert!((&rho * &centered.hamiltonian).trace().norm() < 1e-12);
            for l in &centered.couplings {
                assert!((&rho * l).trace().norm() < 1e-12);
            }
            let again = euclidean_transform(&g, &e).unwrap();
            assert_eq!(again, centered);
            assert!(superop_distance(&spec, &centered.generator_spec().unwrap()) < 1e-10);
        }
    }

    #[test]
    fn minimality_examples() {
        let tol = Tolerance::default();
        let g =
            SlhTriple::with_identity_scattering(vec![sz() * r(2.0f64.sqrt())], linalg::zeros(2))
                .unwrap();
        assert!(is_minimal(&g, tol));
        let dup = SlhTriple::with_identity_scattering(vec![sz(), sz() * r(2.0)], linalg::zeros(2))
            .unwrap();
        assert!(!is_minimal(&dup, tol));
        let qutrit = SlhTriple::with_identity_scattering(
            vec![diag_real(&[1.0, 2.0, 1.0]), diag_real(&[2.0, 4.0, 0.0])],
            linalg::zeros(3),
        )
        .unwrap();
        assert!(is_minimal(&qutrit, tol));
    }

    #[test]
    fn reduce_to_minimal_examples() {
        let tol = Tolerance::default();
        let qutrit = SlhTriple::with_identity_scattering(
            vec![diag_real(&[1.0, 2.0, 1.0]), diag_real(&[2.0, 4.0, 0.0])],
            linalg::zeros(3),
        )
        .unwrap();
        let (reduced, rank) = reduce_to_minimal(&qutrit, tol).unwrap();
        assert_eq!(rank, 2);
        assert!(
            superop_distance(
                &qutrit.generator_spec().unwrap(),
                &reduced.generator_spec().unwrap()
            ) < 1e-10
        );

        let mut rng = random::rng(6);
        let l = random::matrix(&mut rng, 3);
        let l = &l - identity(3) * (l.trace() / 3.0);
        let dup = SlhTriple::with_identity_scattering(vec![l.clone(), l.clone()], linalg::zeros(3))
            .unwrap();
        let (reduced, rank) = reduce_to_minimal(&dup, tol).unwrap();
        assert_eq!(rank, 1);
        assert!((fro(&reduced.couplings[0]) - 2.0f64.sqrt() * fro(&l)).abs() < 1e-12);
        // Equal up to a phase.
        let overlap = reduced.couplings[0].dotc(&l) / (fro(&reduced.couplings[0]) * fro(&l));
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
        assert!(
            superop_distance(
                &dup.generator_spec().unwrap(),
                &reduced.generator_spec().unwrap()
            ) < 1e-10
        );

        let scalar =
            SlhTriple::with_identity_scattering(vec![identity(2) * c(0.3, 0.4)], linalg::zeros(2))
                .unwrap();
        let (reduced, rank) = reduce_to_minimal(&scalar, tol).unwrap();
        assert_eq!(rank, 0);
        assert!(reduced.couplings.is_empty());
        assert_eq!(reduced.scattering.nrows(), 0);
    }

    #[test]
    fn reduce_to_minimal_preserves_random_generators() {
        let tol = Tolerance::default();
        let mut rng = random::rng(7);
        for _ in 0..10 {
            let base = random::spec(&mut rng, 3, 2, 1.0);
            // Pad with dependent channels and identity components.
            let mut couplings = base.couplings.clone();
            couplings.push(&base.couplings[0] * c(0.5, 0.5) + identity(3) * c(1.0, -2.0));
            couplings.push(identity(3) * c(0.2, 0.0));
            let g =
                SlhTriple::with_identity_scattering(couplings, base.hamiltonian.clone()).unwrap();
            let (reduced, rank) = reduce_to_minimal(&g, tol).unwrap();
            assert_eq!(rank, 2);
            assert!(is_minimal(&reduced, tol));
            assert!(
                superop_distance(
                    &g.generator_spec().unwrap(),
                    &reduced.generator_spec().unwrap()
                ) < 1e-10
            );
            assert_eq!(reduced.scattering, identity(2 * 3));
        }
    }

    #[test]
    fn reduced_couplings_stay_in_the_span() {
        // Two commuting qubit couplings compress to one that is still normal.
        let tol = Tolerance::default();
        let mut rng = random::rng(10);
        for _ in 0..50 {
            let u = random::unitary(&mut rng, 2);
            let cols = random::complex_columns(&mut rng, 2, 2);
            let spec = random::diagonal_spec(&u, &cols, &[0.0, 0.0]);
            let (reduced, rank) = reduce_to_minimal(&SlhTriple::from_spec(&spec), tol).unwrap();
            assert_eq!(rank, 1);
            let l = &reduced.couplings[0];
            assert!(linalg::normality_residual(l) < 1e-12);
            assert!(linalg::off_diagonal_norm(&(u.adjoint() * l * &u)) < 1e-12);
        }
    }
}
