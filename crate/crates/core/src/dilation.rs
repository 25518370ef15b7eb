//! Essentially classical dilations driven by Poisson jumps, Wiener phases and
//! a deterministic Hamiltonian.

use nalgebra::{DMatrix, DVector};

use crate::dephasing::{self, Obstruction};
use crate::error::{Error, Result};
use crate::linalg::{self, c, fro, identity, r, Operator, Tolerance, C64};
use crate::model::{self, GeneratorSpec, SlhTriple};
use crate::semigroup::{self, to_superoperator, Picture};

/// Poisson channel: the state is kicked by `scattering` at rate `rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub scattering: Operator,
    pub rate: f64,
    /// Phase of the field amplitude `ξ = √ν e^{iφ}` used by the germ.
    pub phase: Option<f64>,
}

/// Wiener channel: `e^{−iRW(t)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diffusion {
    pub generator: Operator,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalModel {
    pub jumps: Vec<Jump>,
    pub diffusions: Vec<Diffusion>,
    pub hamiltonian: Operator,
}

impl ClassicalModel {
    pub fn new(
        jumps: Vec<Jump>,
        diffusions: Vec<Diffusion>,
        hamiltonian: Operator,
        tol: Tolerance,
    ) -> Result<Self> {
        let n = hamiltonian.nrows();
        let shape_ok = |a: &Operator| a.nrows() == n && a.ncols() == n;
        if !shape_ok(&hamiltonian) {
            return Err(Error::InvalidModel("Hamiltonian must be square".into()));
        }
        let herm = linalg::hermiticity_residual(&hamiltonian);
        if !linalg::is_finite(&hamiltonian) || !tol.accepts(herm, fro(&hamiltonian)) {
            return Err(Error::InvalidModel(format!(
                "Hamiltonian is not Hermitian (residual {herm:.3e})"
            )));
        }
        for (j, jump) in jumps.iter().enumerate() {
            if !shape_ok(&jump.scattering) {
                return Err(Error::InvalidModel(format!("jump {j} is not {n}x{n}")));
            }
            if !(jump.rate > 0.0 && jump.rate.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "jump {j} has rate {}, expected a positive number",
                    jump.rate
                )));
            }
            let residual = linalg::unitarity_residual(&jump.scattering);
            if !linalg::is_finite(&jump.scattering) || !tol.accepts(residual, n as f64) {
                return Err(Error::InvalidModel(format!(
                    "jump {j} is not unitary (residual {residual:.3e})"
                )));
            }
            if jump.phase.is_some_and(|p| !p.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "jump {j} has a non-finite phase"
                )));
            }
        }
        for (k, diff) in diffusions.iter().enumerate() {
            if !shape_ok(&diff.generator) {
                return Err(Error::InvalidModel(format!("diffusion {k} is not {n}x{n}")));
            }
            let residual = linalg::hermiticity_residual(&diff.generator);
            if !linalg::is_finite(&diff.generator) || !tol.accepts(residual, fro(&diff.generator)) {
                return Err(Error::InvalidModel(format!(
                    "diffusion {k} is not Hermitian (residual {residual:.3e})"
                )));
            }
            if diff.theta.is_some_and(|p| !p.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "diffusion {k} has a non-finite phase"
                )));
            }
        }
        Ok(ClassicalModel {
            jumps,
            diffusions,
            hamiltonian,
        })
    }

    pub fn hamiltonian_only(hamiltonian: Operator) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), hamiltonian, Tolerance::default())
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Every `S_j`, `R_k` and `H`, in that order.
    pub fn family(&self) -> Vec<Operator> {
        self.jumps
            .iter()
            .map(|j| j.scattering.clone())
            .chain(self.diffusions.iter().map(|d| d.generator.clone()))
            .chain(std::iter::once(self.hamiltonian.clone()))
            .collect()
    }

    /// Copy with every jump rate multiplied by `factor`.
    pub fn with_scaled_rates(&self, factor: f64) -> Result<Self> {
        let mut out = self.clone();
        for j in &mut out.jumps {
            j.rate *= factor;
        }
        Self::new(
            out.jumps,
            out.diffusions,
            out.hamiltonian,
            Tolerance::default(),
        )
    }
}

/// `L = {√ν_j S_j} ∪ {R_k}`, `H` unchanged. The identity part of `√ν S`
/// contributes nothing, so the generator is
/// `Σ ν_j(S_j†XS_j − X) − ½Σ[[X,R_k],R_k] − i[X,H]`.
pub fn classical_to_generator(m: &ClassicalModel) -> Result<GeneratorSpec> {
    let couplings = m
        .jumps
        .iter()
        .map(|j| &j.scattering * r(j.rate.sqrt()))
        .chain(m.diffusions.iter().map(|d| d.generator.clone()))
        .collect();
    GeneratorSpec::new(couplings, m.hamiltonian.clone())
        .map_err(|e| Error::InvalidModel(e.to_string()))
}

/// Germ of a Poisson channel: `(S, ξ(S − 1), |ξ|²/(2i)(S† − S))`.
pub fn jump_germ(jump: &Jump) -> SlhTriple {
    let n = jump.scattering.nrows();
    let xi = C64::from_polar(jump.rate.sqrt(), jump.phase.unwrap_or(0.0));
    let s = &jump.scattering;
    let coupling = (s - identity(n)) * xi;
    let hamiltonian = (s.adjoint() - s) * (r(xi.norm_sqr()) / c(0.0, 2.0));
    SlhTriple::new(s.clone(), vec![coupling], linalg::herm_part(&hamiltonian))
        .expect("germ shapes agree")
}

/// Germ of a Wiener channel: `(1, e^{iθ}R, 0)`.
pub fn diffusion_germ(diff: &Diffusion) -> SlhTriple {
    let n = diff.generator.nrows();
    let phase = C64::from_polar(1.0, diff.theta.unwrap_or(0.0));
    SlhTriple::with_identity_scattering(vec![&diff.generator * phase], linalg::zeros(n))
        .expect("germ shapes agree")
}

/// Concatenation of all channel germs and the deterministic part `(·, ·, H)`.
pub fn classical_to_slh(m: &ClassicalModel) -> Result<SlhTriple> {
    let n = m.dim();
    let mut out = SlhTriple::with_identity_scattering(Vec::new(), m.hamiltonian.clone())
        .map_err(|e| Error::InvalidModel(e.to_string()))?;
    for g in m
        .jumps
        .iter()
        .map(jump_germ)
        .chain(m.diffusions.iter().map(diffusion_germ))
    {
        out = model::concatenation(&out, &g)?;
    }
    debug_assert_eq!(out.dim, n);
    Ok(out)
}

pub fn verify_classical_model(
    m: &ClassicalModel,
    spec: &GeneratorSpec,
    tol: Tolerance,
) -> Result<bool> {
    if m.dim() != spec.dim() {
        return Err(Error::DimensionMismatch(format!(
            "model on dimension {} against generator on dimension {}",
            m.dim(),
            spec.dim()
        )));
    }
    let induced = classical_to_generator(m)?;
    let distance = semigroup::generator_distance(&induced, spec)?;
    let scale = fro(&to_superoperator(spec, Picture::Heisenberg).matrix);
    Ok(tol.accepts(distance, scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassicalityKind {
    Line,
    Circle,
    Both,
    NotClassical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalityVerdict {
    pub kind: ClassicalityKind,
    /// Point on the line and unit direction.
    pub line: Option<(C64, C64)>,
    /// Center and radius.
    pub circle: Option<(C64, f64)>,
    /// Fit residual of the reported geometry, or the normality defect.
    pub residual: f64,
}

const FIT_TOL: f64 = 1e-8;

/// A single coupling admits a classical dilation exactly when it is normal
/// with spectrum on a line or a circle.
pub fn km_rank1_classical_test(l: &Operator, tol: Tolerance) -> Result<ClassicalityVerdict> {
    let normality = linalg::normality_residual(l);
    if !tol.accepts(normality, fro(l) * fro(l)) {
        return Ok(ClassicalityVerdict {
            kind: ClassicalityKind::NotClassical,
            line: None,
            circle: None,
            residual: normality,
        });
    }
    let eig = linalg::eigenvalues(l)?;
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let fit_tol = FIT_TOL.max(tol.abs_tol) * scale;
    let mut points: Vec<C64> = Vec::new();
    for z in eig {
        if points.iter().all(|p| (p - z).norm() > fit_tol) {
            points.push(z);
        }
    }
    let line = fit_line(&points);
    let circle = fit_circle(&points);
    if points.len() <= 2 {
        return Ok(ClassicalityVerdict {
            kind: ClassicalityKind::Both,
            line: Some((line.0, line.1)),
            circle: circle.map(|c| (c.0, c.1)),
            residual: line.2,
        });
    }
    let on_line = line.2 <= fit_tol;
    let on_circle = circle.filter(|c| c.2 <= fit_tol);
    let (kind, residual) = match (on_line, on_circle) {
        (true, Some(c)) => (ClassicalityKind::Both, line.2.max(c.2)),
        (true, None) => (ClassicalityKind::Line, line.2),
        (false, Some(c)) => (ClassicalityKind::Circle, c.2),
        (false, None) => (
            ClassicalityKind::NotClassical,
            line.2.min(circle.map_or(f64::INFINITY, |c| c.2)),
        ),
    };
    Ok(ClassicalityVerdict {
        kind,
        line: on_line.then_some((line.0, line.1)),
        circle: on_circle.map(|c| (c.0, c.1)),
        residual,
    })
}

/// Total least squares line: centroid, unit direction, max distance.
fn fit_line(points: &[C64]) -> (C64, C64, f64) {
    let m = points.len().max(1) as f64;
    let centroid: C64 = points.iter().sum::<C64>() / m;
    let data = DMatrix::from_fn(points.len().max(1), 2, |i, j| {
        let p = points.get(i).map_or(C64::new(0.0, 0.0), |p| p - centroid);
        if j == 0 {
            p.re
        } else {
            p.im
        }
    });
    let dir = match linalg::real_svd(&data) {
        Ok((_, _, v)) => C64::new(v[(0, 0)], v[(1, 0)]),
        Err(_) => C64::new(1.0, 0.0),
    };
    let dist = points
        .iter()
        .map(|p| {
            let q = p - centroid;
            (q.re * dir.im - q.im * dir.re).abs()
        })
        .fold(0.0, f64::max);
    (centroid, dir, dist)
}

/// Algebraic (Kåsa) circle fit: center, radius, max radial deviation.
fn fit_circle(points: &[C64]) -> Option<(C64, f64, f64)> {
    if points.len() < 3 {
        return None;
    }
    let a = DMatrix::from_fn(points.len(), 3, |i, j| match j {
        0 => points[i].re,
        1 => points[i].im,
        _ => 1.0,
    });
    let b = DVector::from_fn(points.len(), |i, _| -points[i].norm_sqr());
    let (values, u, v) = linalg::real_svd(&a).ok()?;
    let smax = values[0];
    if values[2] <= 1e-12 * smax {
        // Collinear points.
        return None;
    }
    let ub = u.columns(0, 3).transpose() * b;
    let sol = v * DVector::from_fn(3, |k, _| ub[k] / values[k]);
    let center = C64::new(-sol[0] / 2.0, -sol[1] / 2.0);
    let radius_sq = center.norm_sqr() - sol[2];
    if !(radius_sq > 0.0) {
        return None;
    }
    let radius = radius_sq.sqrt();
    let dev = points
        .iter()
        .map(|p| ((p - center).norm() - radius).abs())
        .fold(0.0, f64::max);
    Some((center, radius, dev))
}

/// Diagonal data of a model in `basis`: per-jump diagonals of `S_j`,
/// per-diffusion diagonals of `R_k`, and the energies.
pub struct DiagonalModel {
    pub jumps: Vec<(f64, Vec<C64>)>,
    pub diffusions: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
}

pub fn diagonal_model(
    m: &ClassicalModel,
    basis: &Operator,
    tol: Tolerance,
) -> Result<DiagonalModel> {
    let n = m.dim();
    if basis.nrows() != n || basis.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "basis is {}x{}, expected {n}x{n}",
            basis.nrows(),
            basis.ncols()
        )));
    }
    let diagonal = |a: &Operator| -> Result<Vec<C64>> {
        let b = basis.adjoint() * a * basis;
        let residual = linalg::off_diagonal_norm(&b);
        if !tol.accepts(residual, fro(a)) {
            return Err(Error::NotDiagonal { residual });
        }
        Ok((0..n).map(|k| b[(k, k)]).collect())
    };
    let jumps = m
        .jumps
        .iter()
        .map(|j| Ok((j.rate, diagonal(&j.scattering)?)))
        .collect::<Result<_>>()?;
    let diffusions = m
        .diffusions
        .iter()
        .map(|d| Ok(diagonal(&d.generator)?.iter().map(|z| z.re).collect()))
        .collect::<Result<_>>()?;
    let energies = diagonal(&m.hamiltonian)?.iter().map(|z| z.re).collect();
    Ok(DiagonalModel {
        jumps,
        diffusions,
        energies,
    })
}

/// `z_nm = Σ_j ν_j(e^{−i(θ_jn − θ_jm)} − 1) − ½Σ_k(r_kn − r_km)² + i(ε_n − ε_m)`
/// with `S_j = Σ e^{iθ_jn}|n⟩⟨n|`.
pub fn jump_dephasing_coefficients(
    m: &ClassicalModel,
    basis: &Operator,
    tol: Tolerance,
) -> Result<DMatrix<C64>> {
    let data = diagonal_model(m, basis, tol)?;
    let n = m.dim();
    Ok(DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            return C64::new(0.0, 0.0);
        }
        let mut z = C64::new(0.0, data.energies[a] - data.energies[b]);
        for (nu, s) in &data.jumps {
            let (ta, tb) = (s[a].arg(), s[b].arg());
            z += (C64::from_polar(1.0, -(ta - tb)) - 1.0) * nu;
        }
        for rr in &data.diffusions {
            z -= r(0.5 * (rr[a] - rr[b]).powi(2));
        }
        z
    }))
}

/// `Δ_nml = Σ_j ν_j{sin(θ_jm − θ_jn) + sin(θ_jl − θ_jm) + sin(θ_jn − θ_jl)}`.
pub fn obstruction_from_phases(
    m: &ClassicalModel,
    basis: &Operator,
    tol: Tolerance,
) -> Result<Obstruction> {
    let data = diagonal_model(m, basis, tol)?;
    let n = m.dim();
    let areas = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            return 0.0;
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        sign * data
            .jumps
            .iter()
            .map(|(nu, s)| nu * (s[hi].arg() - s[lo].arg()).sin())
            .sum::<f64>()
    });
    Ok(Obstruction::from_areas(&areas))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusiveVerdict {
    pub admits: bool,
    pub model: Option<ClassicalModel>,
    /// `max |A_nm|` in the representation as given.
    pub max_area: f64,
    pub max_delta: f64,
    /// `Σ_k r_kn²` of the emitted diffusions, one per stable basis state.
    pub variances: Vec<f64>,
}

/// A maximally dephasing generator has a purely diffusive classical dilation
/// exactly when the areas vanish after fixing the phase gauge, which happens
/// exactly when the obstruction vanishes. The returned model uses the
/// self-adjoint couplings as diffusions.
pub fn admits_diffusive_dilation(spec: &GeneratorSpec, tol: Tolerance) -> Result<DiffusiveVerdict> {
    let verdict = dephasing::is_maximally_dephasing(spec, tol);
    let report = match verdict {
        dephasing::MaximalDephasingVerdict {
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
    let max_area = report
        .blocks
        .areas
        .iter()
        .map(|a| a.abs())
        .fold(0.0, f64::max);
    let max_delta = report.delta.max_abs().0;
    match dephasing::self_adjoint_from_report(spec, &report, tol) {
        Ok(sa) => {
            let u = &report.stable_basis;
            let n = spec.dim();
            let mut variances = vec![0.0; n];
            for l in &sa.couplings {
                let d = u.adjoint() * l * u;
                for (k, v) in variances.iter_mut().enumerate() {
                    *v += d[(k, k)].re.powi(2);
                }
            }
            let diffusions = sa
                .couplings
                .into_iter()
                .map(|generator| Diffusion {
                    generator,
                    theta: None,
                })
                .collect();
            let model = ClassicalModel::new(Vec::new(), diffusions, sa.hamiltonian, tol)?;
            Ok(DiffusiveVerdict {
                admits: true,
                model: Some(model),
                max_area,
                max_delta,
                variances,
            })
        }
        Err(Error::Obstructed { .. }) => Ok(DiffusiveVerdict {
            admits: false,
            model: None,
            max_area,
            max_delta,
            variances: Vec::new(),
        }),
        Err(e) => Err(e),
    }
}

/// `−i log S` on the principal branch, phases in `(−π, π]`.
pub fn jump_phase_generator(s: &Operator, tol: Tolerance) -> Result<Operator> {
    let sd = linalg::simultaneous_diagonalize(std::slice::from_ref(s), tol)?;
    let phases: Vec<f64> = sd.diagonals[0].iter().map(|z| z.arg()).collect();
    let u = &sd.unitary;
    Ok(linalg::herm_part(
        &(u * linalg::diag_real(&phases) * u.adjoint()),
    ))
}
