//! The JSON report written by `qms analyze`.

use serde::{Deserialize, Serialize};

use super::format::{matrix_to_json, real_matrix_to_json, ComplexJson, MatrixJson};
use super::CliError;
use crate::dephasing::{self, DephasingReport};
use crate::dilation;
use crate::error::Error;
use crate::linalg::Tolerance;
use crate::model::{self, SlhTriple};
use crate::semigroup;
use crate::GeneratorSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub unitarity_residual: f64,
    pub hermiticity_residual: f64,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySummary {
    /// Dimension of the kernel of the Schrödinger-picture generator.
    pub kernel_dim: usize,
    pub unique_state: Option<MatrixJson>,
    pub pure_states: Vec<Vec<ComplexJson>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct AnalysisReport {
    pub dim: usize,
    pub multiplicity: usize,
    /// Number of channels in a minimal representation.
    pub rank: usize,
    pub minimal: bool,
    pub bistochastic: bool,
    pub validation: ValidationSummary,
    pub stationary: StationarySummary,
    pub maximally_dephasing: bool,
    pub maximally_dephasing_reason: Option<String>,
    pub stable_basis: Option<MatrixJson>,
    /// `d×N`, column `n` is `λ_n`.
    pub F: Option<MatrixJson>,
    pub energies: Option<Vec<f64>>,
    pub z: Option<MatrixJson>,
    pub Gamma: Option<Vec<Vec<f64>>>,
    pub Omega: Option<Vec<Vec<f64>>>,
    pub Omega_alt: Option<Vec<Vec<f64>>>,
    pub A: Option<Vec<Vec<f64>>>,
    pub Delta_max: f64,
    /// 1-based `(n, m, l)`, `n < m < l`; null when `Δ ≡ 0`.
    pub Delta_argmax: Option<[usize; 3]>,
    /// Signed `Δ` at the argmax.
    pub Delta_value: f64,
    pub max_rank_ok: Option<bool>,
    pub self_adjointizable: bool,
    pub diffusive_dilation: bool,
    pub notes: Vec<String>,
}

pub fn analyze(triple: &SlhTriple, tol: Tolerance) -> Result<AnalysisReport, CliError> {
    let validation = model::validate(triple, tol);
    if !validation.passed() {
        return Err(CliError::invalid(format!(
            "model failed validation: {}",
            validation.failures.join("; ")
        )));
    }
    let spec =
        GeneratorSpec::with_tolerance(triple.couplings.clone(), triple.hamiltonian.clone(), tol)?;
    let n = spec.dim();
    let (_, rank) = model::reduce_to_minimal(triple, tol)?;
    let stationary = semigroup::stationary_states(&spec, tol)?;
    let stationary = StationarySummary {
        kernel_dim: stationary.kernel_dim(),
        unique_state: stationary.unique_state(n).as_ref().map(matrix_to_json),
        pure_states: stationary
            .pure_states
            .iter()
            .map(|p| p.vector.iter().map(|&z| z.into()).collect())
            .collect(),
    };

    let verdict = dephasing::is_maximally_dephasing(&spec, tol);
    let mut report = AnalysisReport {
        dim: n,
        multiplicity: triple.multiplicity(),
        rank,
        minimal: model::is_minimal(triple, tol),
        bistochastic: semigroup::is_bistochastic(&spec, tol),
        validation: ValidationSummary {
            unitarity_residual: validation.unitarity_residual,
            hermiticity_residual: validation.hermiticity_residual,
            failures: validation.failures,
        },
        stationary,
        maximally_dephasing: verdict.maximal,
        maximally_dephasing_reason: verdict.reason.clone(),
        stable_basis: None,
        F: None,
        energies: None,
        z: None,
        Gamma: None,
        Omega: None,
        Omega_alt: None,
        A: None,
        Delta_max: 0.0,
        Delta_argmax: None,
        Delta_value: 0.0,
        max_rank_ok: None,
        self_adjointizable: false,
        diffusive_dilation: false,
        notes: Vec::new(),
    };
    if let Some(dr) = &verdict.report {
        fill_dephasing(&mut report, dr);
        if verdict.maximal {
            report.max_rank_ok = match dephasing::max_rank_check(&spec, dr, tol) {
                Ok(ok) => Some(ok),
                Err(Error::NotApplicable(_)) => None,
                Err(e) => return Err(e.into()),
            };
            report.self_adjointizable = match dephasing::self_adjoint_representation(&spec, tol) {
                Ok(_) => true,
                Err(Error::Obstructed { .. }) => false,
                Err(e) => return Err(e.into()),
            };
            report.diffusive_dilation = dilation::admits_diffusive_dilation(&spec, tol)?.admits;
        }
    }
    report.notes = notes(&report, &spec, verdict.report.as_ref());
    Ok(report)
}

fn fill_dephasing(report: &mut AnalysisReport, dr: &DephasingReport) {
    let b = &dr.blocks;
    report.stable_basis = Some(matrix_to_json(&dr.stable_basis));
    report.F = Some(matrix_to_json(&dr.coupling.f));
    report.energies = Some(dr.coupling.diag_h.clone());
    report.z = Some(matrix_to_json(&b.z));
    report.Gamma = Some(real_matrix_to_json(&b.gamma));
    report.Omega = Some(real_matrix_to_json(&b.omega));
    report.Omega_alt = Some(real_matrix_to_json(&b.omega_alt));
    report.A = Some(real_matrix_to_json(&b.areas));
    let (max, (a, bb, c)) = dr.delta.max_abs();
    report.Delta_max = max;
    if max > 0.0 {
        report.Delta_argmax = Some([a + 1, bb + 1, c + 1]);
        report.Delta_value = dr.delta.get(a, bb, c);
    }
}

fn notes(
    report: &AnalysisReport,
    spec: &GeneratorSpec,
    dr: Option<&DephasingReport>,
) -> Vec<String> {
    let mut notes =
        vec!["series products add both Hamiltonians: H = H1 + H2 + Im{L2^dag S2 L1}".to_string()];
    let Some(dr) = dr else {
        return notes;
    };
    if report.maximally_dephasing {
        notes.push(
            "coherence |e_n><e_m| decays at Gamma_nm = |lambda_n - lambda_m|^2 / 2; \
             for a qubit with L = sqrt(gamma) sigma_z this is 2 gamma, not gamma"
                .to_string(),
        );
    }
    if dr.blocks.areas.iter().any(|a| *a != 0.0) {
        notes.push(
            "Omega = eps_m - eps_n - A_nm is the oscillation frequency of e^{tL}(|e_n><e_m|); \
             Omega_alt = eps_m - eps_n + A_nm is the opposite-sign convention"
                .to_string(),
        );
    }
    if spec.dim() >= 3 && report.Delta_max > 0.0 {
        notes.push(
            "A_nm is gauge dependent; only the cyclic sums Delta_nml are invariant".to_string(),
        );
    }
    notes
}
