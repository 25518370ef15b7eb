use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::format::{self, Model, ModelFile, TransformFile};
use super::report;
use super::{
    CliError, ComposeArgs, SimulateArgs, TransformArgs, EXIT_FAILED, EXIT_OBSTRUCTED, EXIT_OK,
};
use crate::dephasing;
use crate::dilation::{self, ClassicalModel};
use crate::error::Error;
use crate::linalg::{Operator, Tolerance};
use crate::model::{self, SlhTriple};
use crate::semigroup::{self, DensityMatrix, Picture};
use crate::trajectories::{self, SimulationConfig};
use crate::GeneratorSpec;

const MAXIMALLY_MIXED: &str = "maximally-mixed";

fn output(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match out {
        Some(path) => {
            let f = File::create(path)
                .map_err(|e| CliError::invalid(format!("cannot create {}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn io_error(e: impl std::fmt::Display) -> CliError {
    CliError::invalid(format!("write failed: {e}"))
}

fn write_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(io_error)?;
    writeln!(w).map_err(io_error)?;
    w.flush().map_err(io_error)
}

/// Parses and validates a model file.
fn load(path: &Path, tol: Tolerance) -> Result<Model, CliError> {
    let model = format::load_model(path, tol)?;
    let report = model::validate(&model.triple, tol);
    if !report.passed() {
        return Err(CliError::invalid(format!(
            "{}: {}",
            path.display(),
            report.failures.join("; ")
        )));
    }
    Ok(model)
}

fn generator(triple: &SlhTriple, tol: Tolerance) -> Result<GeneratorSpec, CliError> {
    Ok(GeneratorSpec::with_tolerance(
        triple.couplings.clone(),
        triple.hamiltonian.clone(),
        tol,
    )?)
}

fn state(arg: &str, n: usize, tol: Tolerance) -> Result<DensityMatrix, CliError> {
    if arg == MAXIMALLY_MIXED {
        return Ok(DensityMatrix::maximally_mixed(n));
    }
    let rho = format::load_state(Path::new(arg), n)?;
    Ok(DensityMatrix::new(rho, tol)?)
}

/// `k·tmax/steps` for `k = 0..=steps`; the single time 0 when `tmax = 0`.
fn time_grid(tmax: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if !(tmax.is_finite() && tmax >= 0.0) {
        return Err(CliError::invalid(format!(
            "tmax must be finite and nonnegative, got {tmax}"
        )));
    }
    if tmax == 0.0 {
        return Ok(vec![0.0]);
    }
    if steps == 0 {
        return Err(CliError::invalid("steps must be positive"));
    }
    Ok((0..=steps)
        .map(|k| tmax * k as f64 / steps as f64)
        .collect())
}

pub fn analyze(model: &Path, out: Option<&Path>, tol: Tolerance) -> Result<i32, CliError> {
    let m = format::load_model(model, tol)?;
    let report = report::analyze(&m.triple, tol)?;
    write_json(&report, out)?;
    Ok(EXIT_OK)
}

pub fn evolve(
    model: &Path,
    state_arg: &str,
    tmax: f64,
    steps: usize,
    out: Option<&Path>,
    tol: Tolerance,
) -> Result<i32, CliError> {
    let m = load(model, tol)?;
    let spec = generator(&m.triple, tol)?;
    let n = spec.dim();
    let rho0 = state(state_arg, n, tol)?;
    let times = time_grid(tmax, steps)?;
    let states = semigroup::evolve(&spec, rho0.matrix(), &times, Picture::Schrodinger)?;

    let mut w = csv::Writer::from_writer(output(out)?);
    let mut header = vec!["t".to_string()];
    for i in 0..n {
        for j in 0..n {
            header.push(format!("rho_{i}_{j}_re"));
            header.push(format!("rho_{i}_{j}_im"));
        }
    }
    header.push("trace".into());
    header.push("purity".into());
    w.write_record(&header).map_err(io_error)?;
    for (t, rho) in times.iter().zip(&states) {
        let mut row = vec![t.to_string()];
        for i in 0..n {
            for j in 0..n {
                row.push(rho[(i, j)].re.to_string());
                row.push(rho[(i, j)].im.to_string());
            }
        }
        row.push(rho.trace().re.to_string());
        row.push(semigroup::purity(rho).to_string());
        w.write_record(&row).map_err(io_error)?;
    }
    w.flush().map_err(io_error)?;
    Ok(EXIT_OK)
}

pub fn simulate(args: &SimulateArgs, tol: Tolerance) -> Result<i32, CliError> {
    let m = load(&args.model, tol)?;
    let Some(classical) = m.classical else {
        return Err(CliError::invalid(format!(
            "{}: no classical section to simulate",
            args.model.display()
        )));
    };
    let spec = generator(&m.triple, tol)?;
    if !dilation::verify_classical_model(&classical, &spec, tol)? {
        eprintln!("warning: the classical section does not reproduce the model's generator");
    }
    let reference = match args.expect_rate {
        Some(nu) => {
            let mut jumps = classical.jumps.clone();
            for j in &mut jumps {
                j.rate = nu;
            }
            ClassicalModel::new(
                jumps,
                classical.diffusions.clone(),
                classical.hamiltonian.clone(),
                tol,
            )?
        }
        None => classical.clone(),
    };
    let config = SimulationConfig {
        times: time_grid(args.tmax, args.steps)?,
        n_traj: args.traj,
        master_seed: args.seed,
        dt: args.dt,
        mode: args.mode.into(),
    };
    let channel = trajectories::ensemble_average(&classical, &config)?;
    let cmp =
        trajectories::compare_channel(&channel, &dilation::classical_to_generator(&reference)?)?;
    cmp.write_csv(output(args.out.as_deref())?)?;
    eprintln!(
        "{}: max deviation {:.3} standard errors over {} trajectories",
        if cmp.pass { "pass" } else { "FAIL" },
        cmp.max_deviation_in_stderr_units,
        args.traj
    );
    Ok(if cmp.pass { EXIT_OK } else { EXIT_FAILED })
}

pub fn transform(args: &TransformArgs, tol: Tolerance) -> Result<i32, CliError> {
    let m = load(&args.model, tol)?;
    let triple = if args.self_adjoint {
        let spec = generator(&m.triple, tol)?;
        match dephasing::self_adjoint_representation(&spec, tol) {
            Ok(sa) => SlhTriple::with_identity_scattering(sa.couplings, sa.hamiltonian)?,
            Err(Error::Obstructed {
                max_delta,
                triple: (a, b, c),
            }) => {
                return Err(CliError {
                    code: EXIT_OBSTRUCTED,
                    message: format!(
                        "no self-adjoint representation: |Delta_{},{},{}| = {max_delta:.6e}",
                        a + 1,
                        b + 1,
                        c + 1
                    ),
                });
            }
            Err(e) => return Err(e.into()),
        }
    } else if let Some(state_arg) = &args.center {
        let rho = state(state_arg, m.triple.dim, tol)?;
        model::center(&m.triple, rho.matrix(), tol)?.0
    } else if let Some(path) = &args.euclidean {
        let e = TransformFile::load(path)?.to_transform()?;
        model::euclidean_transform(&m.triple, &e)?
    } else {
        return Err(CliError::invalid("no transform selected"));
    };
    let out = Model {
        triple,
        classical: m.classical,
    };
    write_json(&ModelFile::from_model(&out), args.out.as_deref())?;
    Ok(EXIT_OK)
}

fn pair(paths: &[PathBuf], tol: Tolerance) -> Result<(Model, Model), CliError> {
    match paths {
        [a, b] => Ok((load(a, tol)?, load(b, tol)?)),
        _ => Err(CliError::invalid("expected two model files")),
    }
}

pub fn compose(args: &ComposeArgs, tol: Tolerance) -> Result<i32, CliError> {
    let out = if let Some(paths) = &args.series {
        let (a, b) = pair(paths, tol)?;
        Model {
            triple: model::series_product(&a.triple, &b.triple)?,
            classical: None,
        }
    } else if let Some(paths) = &args.concat {
        let (a, b) = pair(paths, tol)?;
        let triple = model::concatenation(&a.triple, &b.triple)?;
        let classical = match (a.classical, b.classical) {
            (Some(x), Some(y)) => Some(concat_classical(x, y, tol)?),
            _ => None,
        };
        Model { triple, classical }
    } else {
        return Err(CliError::invalid("no composition selected"));
    };
    write_json(&ModelFile::from_model(&out), args.out.as_deref())?;
    Ok(EXIT_OK)
}

/// Independent noises add their generators.
fn concat_classical(
    a: ClassicalModel,
    b: ClassicalModel,
    tol: Tolerance,
) -> Result<ClassicalModel, CliError> {
    let hamiltonian: Operator = &a.hamiltonian + &b.hamiltonian;
    let jumps = a.jumps.into_iter().chain(b.jumps).collect();
    let diffusions = a.diffusions.into_iter().chain(b.diffusions).collect();
    Ok(ClassicalModel::new(jumps, diffusions, hamiltonian, tol)?)
}
