//! Monte Carlo averages of classical unitary dilations.
//!
//! A trajectory is a random unitary `V(t)`; the averaged Heisenberg map is
//! `Φ̂_t(X) = E[V(t)† X V(t)]`, represented on column-stacked operators by
//! `E[Vᵀ ⊗ V†]`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::dilation::{classical_to_generator, ClassicalModel};
use crate::error::{Error, Result};
use crate::linalg::{self, herm_eig, identity, kron, Operator, Tolerance, C64};
use crate::semigroup::{check_times, to_superoperator, Picture};
use crate::GeneratorSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Requires every `S_j`, `R_k` and `H` to commute; samples phases exactly.
    ExactCommuting,
    /// Split-step integration with step at most `dt`.
    Trotterized,
    /// `ExactCommuting` when the family commutes, otherwise `Trotterized`.
    Auto,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub times: Vec<f64>,
    pub n_traj: usize,
    pub master_seed: u64,
    pub dt: f64,
    pub mode: Mode,
}

impl SimulationConfig {
    pub fn new(times: Vec<f64>, n_traj: usize, master_seed: u64) -> Self {
        SimulationConfig {
            times,
            n_traj,
            master_seed,
            dt: 1e-2,
            mode: Mode::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::InvalidConfig("no output times".into()));
        }
        check_times(&self.times)?;
        if self.n_traj < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 trajectories, got {}",
                self.n_traj
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        Ok(())
    }
}

const MAX_KICK_PROBABILITY_SCALE: f64 = 0.1;
const BLOCK: usize = 512;

enum Engine {
    Exact {
        basis: Operator,
        /// `(ν_j, e^{iθ_jn})`.
        jumps: Vec<(f64, Vec<C64>)>,
        diffusions: Vec<Vec<f64>>,
        energies: Vec<f64>,
    },
    Trotter {
        jumps: Vec<(f64, Operator)>,
        /// Eigenvalues and eigenvectors of each `R_k`.
        diffusions: Vec<(Vec<f64>, Operator)>,
        hamiltonian: (Vec<f64>, Operator),
        dt: f64,
    },
}

/// Prepared sampler for one model and configuration.
pub struct Simulator {
    engine: Engine,
    n: usize,
    times: Vec<f64>,
    master_seed: u64,
}

impl Simulator {
    pub fn new(model: &ClassicalModel, config: &SimulationConfig) -> Result<Self> {
        config.validate()?;
        let tol = Tolerance::default();
        let engine = match config.mode {
            Mode::ExactCommuting => exact_engine(model, tol)?,
            Mode::Trotterized => trotter_engine(model, config, tol)?,
            Mode::Auto => match exact_engine(model, tol) {
                Ok(e) => e,
                Err(Error::NotCommuting { .. }) | Err(Error::DegeneracyUnresolved { .. }) => {
                    trotter_engine(model, config, tol)?
                }
                Err(e) => return Err(e),
            },
        };
        Ok(Simulator {
            engine,
            n: model.dim(),
            times: config.times.clone(),
            master_seed: config.master_seed,
        })
    }

    pub fn mode(&self) -> Mode {
        match self.engine {
            Engine::Exact { .. } => Mode::ExactCommuting,
            Engine::Trotter { .. } => Mode::Trotterized,
        }
    }

    /// Independent stream `index` of the master seed.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(index);
        rng
    }

    pub fn trajectory(&self, index: u64) -> Vec<Operator> {
        self.sample(&mut self.rng(index))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<Operator> {
        match &self.engine {
            Engine::Exact {
                basis,
                jumps,
                diffusions,
                energies,
            } => sample_exact(self.n, &self.times, basis, jumps, diffusions, energies, rng),
            Engine::Trotter {
                jumps,
                diffusions,
                hamiltonian,
                dt,
            } => sample_trotter(
                self.n,
                &self.times,
                jumps,
                diffusions,
                hamiltonian,
                *dt,
                rng,
            ),
        }
    }
}

fn exact_engine(model: &ClassicalModel, tol: Tolerance) -> Result<Engine> {
    let sd = linalg::simultaneous_diagonalize(&model.family(), tol)?;
    let nj = model.jumps.len();
    let nd = model.diffusions.len();
    let jumps = model
        .jumps
        .iter()
        .zip(&sd.diagonals[..nj])
        .map(|(j, d)| (j.rate, d.iter().map(|z| z / z.norm()).collect()))
        .collect();
    let diffusions = sd.diagonals[nj..nj + nd]
        .iter()
        .map(|d| d.iter().map(|z| z.re).collect())
        .collect();
    let energies = sd.diagonals[nj + nd].iter().map(|z| z.re).collect();
    Ok(Engine::Exact {
        basis: sd.unitary,
        jumps,
        diffusions,
        energies,
    })
}

fn trotter_engine(
    model: &ClassicalModel,
    config: &SimulationConfig,
    tol: Tolerance,
) -> Result<Engine> {
    let dt = config.dt;
    let min_gap = config
        .times
        .windows(2)
        .map(|w| w[1] - w[0])
        .chain(config.times.first().copied())
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    if dt > min_gap {
        return Err(Error::InvalidConfig(format!(
            "dt = {dt} exceeds the smallest gap {min_gap} between output times"
        )));
    }
    for (j, jump) in model.jumps.iter().enumerate() {
        if jump.rate * dt > MAX_KICK_PROBABILITY_SCALE {
            return Err(Error::InvalidConfig(format!(
                "jump {j}: rate*dt = {} exceeds {MAX_KICK_PROBABILITY_SCALE}",
                jump.rate * dt
            )));
        }
    }
    let diffusions = model
        .diffusions
        .iter()
        .map(|d| herm_eig(&d.generator, tol))
        .collect::<Result<_>>()?;
    Ok(Engine::Trotter {
        jumps: model
            .jumps
            .iter()
            .map(|j| (j.rate, j.scattering.clone()))
            .collect(),
        diffusions,
        hamiltonian: herm_eig(&model.hamiltonian, tol)?,
        dt,
    })
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> f64 {
    if mean > 0.0 {
        Poisson::new(mean)
            .expect("positive finite mean")
            .sample(rng)
    } else {
        0.0
    }
}

/// `V(t) = Q diag(e^{iφ_n(t)}) Q†` with
/// `φ_n = Σ_j θ_jn N_j(t) − Σ_k r_kn W_k(t) − ε_n t`.
fn sample_exact<R: Rng>(
    n: usize,
    times: &[f64],
    basis: &Operator,
    jumps: &[(f64, Vec<C64>)],
    diffusions: &[Vec<f64>],
    energies: &[f64],
    rng: &mut R,
) -> Vec<Operator> {
    let mut counts = vec![0.0; jumps.len()];
    let mut wiener = vec![0.0; diffusions.len()];
    let mut last = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - last;
        for (c, (nu, _)) in counts.iter_mut().zip(jumps) {
            *c += poisson(nu * dt, rng);
        }
        for w in wiener.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *w += g * dt.sqrt();
        }
        last = t;
        if t == 0.0 {
            out.push(identity(n));
            continue;
        }
        let phases: Vec<C64> = (0..n)
            .map(|k| {
                let mut z = C64::from_polar(1.0, -energies[k] * t);
                for (c, (_, s)) in counts.iter().zip(jumps) {
                    z *= s[k].powf(*c);
                }
                let w: f64 = diffusions.iter().zip(&wiener).map(|(r, w)| r[k] * w).sum();
                z * C64::from_polar(1.0, -w)
            })
            .collect();
        out.push(basis * linalg::diag(&phases) * basis.adjoint());
    }
    out
}

/// Per step `h ≤ dt`: `V ← e^{−iHh} Π_k e^{−iR_kΔW_k} Π_j S_j^{b_j} V`, jumps
/// applied first in channel order, then diffusions in channel order, then
/// `H`. Each `b_j ∈ {0, 1}` is one with probability `1 − e^{−ν_j h}`.
fn sample_trotter<R: Rng>(
    n: usize,
    times: &[f64],
    jumps: &[(f64, Operator)],
    diffusions: &[(Vec<f64>, Operator)],
    hamiltonian: &(Vec<f64>, Operator),
    dt: f64,
    rng: &mut R,
) -> Vec<Operator> {
    let mut v = identity(n);
    let mut last = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let gap = t - last;
        if gap > 0.0 {
            let steps = (gap / dt).ceil().max(1.0) as usize;
            let h = gap / steps as f64;
            let uh = linalg::unitary_from_spectrum(&hamiltonian.0, &hamiltonian.1, h);
            let kick: Vec<f64> = jumps.iter().map(|(nu, _)| 1.0 - (-nu * h).exp()).collect();
            for _ in 0..steps {
                for ((_, s), p) in jumps.iter().zip(&kick) {
                    if rng.random::<f64>() < *p {
                        v = s * v;
                    }
                }
                for (vals, vecs) in diffusions {
                    let g: f64 = rng.sample(StandardNormal);
                    v = linalg::unitary_from_spectrum(vals, vecs, g * h.sqrt()) * v;
                }
                v = &uh * v;
            }
        }
        last = t;
        out.push(v.clone());
    }
    out
}

/// One trajectory of `V(t)` at the given times.
pub fn sample_trajectory<R: Rng>(
    model: &ClassicalModel,
    times: &[f64],
    mode: Mode,
    dt: f64,
    rng: &mut R,
) -> Result<Vec<Operator>> {
    let config = SimulationConfig {
        times: times.to_vec(),
        n_traj: 2,
        master_seed: 0,
        dt,
        mode,
    };
    Ok(Simulator::new(model, &config)?.sample(rng))
}

/// Heisenberg map `X ↦ V†XV` on column-stacked operators.
pub fn conjugation_map(v: &Operator) -> Operator {
    kron(&v.transpose(), &v.adjoint())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalChannel {
    pub times: Vec<f64>,
    pub n_traj: usize,
    pub mean_maps: Vec<Operator>,
    /// Entrywise standard errors of the mean maps.
    pub stderr_entries: Vec<DMatrix<f64>>,
    /// Largest entrywise standard error per time.
    pub stderr: Vec<f64>,
}

struct Sums {
    first: Vec<Operator>,
    second: Vec<DMatrix<f64>>,
}

impl Sums {
    fn zeros(times: usize, m: usize) -> Self {
        Sums {
            first: vec![Operator::zeros(m, m); times],
            second: vec![DMatrix::zeros(m, m); times],
        }
    }

    fn add(&mut self, other: &Sums) {
        for (a, b) in self.first.iter_mut().zip(&other.first) {
            *a += b;
        }
        for (a, b) in self.second.iter_mut().zip(&other.second) {
            *a += b;
        }
    }
}

/// Averages `n_traj` trajectories. Trajectory `i` uses stream `i` of the
/// master seed; blocks of fixed size are summed in index order, so the result
/// does not depend on the number of worker threads.
pub fn ensemble_average(
    model: &ClassicalModel,
    config: &SimulationConfig,
) -> Result<EmpiricalChannel> {
    let sim = Simulator::new(model, config)?;
    Ok(average_with(&sim, config))
}

fn average_with(sim: &Simulator, config: &SimulationConfig) -> EmpiricalChannel {
    let n = sim.n;
    let m = n * n;
    let k = config.times.len();
    let blocks: Vec<(usize, usize)> = (0..config.n_traj)
        .step_by(BLOCK)
        .map(|start| (start, (start + BLOCK).min(config.n_traj)))
        .collect();
    let partial: Vec<Sums> = blocks
        .par_iter()
        .map(|&(start, end)| {
            let mut sums = Sums::zeros(k, m);
            for i in start..end {
                for (slot, v) in sim.trajectory(i as u64).iter().enumerate() {
                    let map = conjugation_map(v);
                    sums.second[slot] += map.map(|z| z.norm_sqr());
                    sums.first[slot] += map;
                }
            }
            sums
        })
        .collect();
    let mut total = Sums::zeros(k, m);
    for p in &partial {
        total.add(p);
    }
    let count = config.n_traj as f64;
    let mean_maps: Vec<Operator> = total
        .first
        .iter()
        .map(|s| s / C64::new(count, 0.0))
        .collect();
    let stderr_entries: Vec<DMatrix<f64>> = total
        .second
        .iter()
        .zip(&mean_maps)
        .map(|(sq, mean)| {
            DMatrix::from_fn(m, m, |a, b| {
                let var =
                    (sq[(a, b)] / count - mean[(a, b)].norm_sqr()).max(0.0) * count / (count - 1.0);
                (var / count).sqrt()
            })
        })
        .collect();
    let stderr = stderr_entries.iter().map(|s| s.max()).collect();
    EmpiricalChannel {
        times: config.times.clone(),
        n_traj: config.n_traj,
        mean_maps,
        stderr_entries,
        stderr,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    pub max_abs_deviation: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Per time, largest `dev / max(stderr, floor/5)` over entries.
    pub dev_over_stderr: Vec<f64>,
    pub max_deviation_in_stderr_units: f64,
    pub pass: bool,
}

pub const SIGMA_THRESHOLD: f64 = 5.0;
pub const ABSOLUTE_FLOOR: f64 = 1e-6;

/// Compares averaged maps with `e^{t𝓛}` of `reference`; passes iff every
/// entry deviation is at most `max(5·stderr, 1e-6)`.
pub fn compare_channel(
    channel: &EmpiricalChannel,
    reference: &GeneratorSpec,
) -> Result<ComparisonReport> {
    let n = reference.dim();
    if channel
        .mean_maps
        .first()
        .is_some_and(|m| m.nrows() != n * n)
    {
        return Err(Error::DimensionMismatch(format!(
            "empirical maps act on dimension {}, reference on {n}",
            (channel.mean_maps[0].nrows() as f64).sqrt() as usize
        )));
    }
    let sup = to_superoperator(reference, Picture::Heisenberg);
    let mut max_abs_deviation = Vec::new();
    let mut dev_over_stderr = Vec::new();
    let mut pass = true;
    for ((t, mean), se) in channel
        .times
        .iter()
        .zip(&channel.mean_maps)
        .zip(&channel.stderr_entries)
    {
        let exact = sup.propagator(*t)?;
        let mut worst_dev: f64 = 0.0;
        let mut worst_ratio: f64 = 0.0;
        for a in 0..mean.nrows() {
            for b in 0..mean.ncols() {
                let dev = (mean[(a, b)] - exact[(a, b)]).norm();
                worst_dev = worst_dev.max(dev);
                let allowed = (SIGMA_THRESHOLD * se[(a, b)]).max(ABSOLUTE_FLOOR);
                worst_ratio = worst_ratio.max(SIGMA_THRESHOLD * dev / allowed);
                pass &= dev <= allowed;
            }
        }
        max_abs_deviation.push(worst_dev);
        dev_over_stderr.push(worst_ratio);
    }
    let max_units = dev_over_stderr.iter().copied().fold(0.0, f64::max);
    Ok(ComparisonReport {
        times: channel.times.clone(),
        max_abs_deviation,
        stderr: channel.stderr.clone(),
        dev_over_stderr,
        max_deviation_in_stderr_units: max_units,
        pass,
    })
}

/// Simulates `model` and compares against its own generator.
pub fn compare_to_semigroup(
    model: &ClassicalModel,
    config: &SimulationConfig,
) -> Result<ComparisonReport> {
    let channel = ensemble_average(model, config)?;
    compare_channel(&channel, &classical_to_generator(model)?)
}

impl ComparisonReport {
    /// CSV with columns `t,max_abs_dev,stderr,dev_over_stderr`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidConfig(format!("CSV output failed: {e}"));
        w.write_record(["t", "max_abs_dev", "stderr", "dev_over_stderr"])
            .map_err(io)?;
        for i in 0..self.times.len() {
            w.write_record([
                self.times[i].to_string(),
                self.max_abs_deviation[i].to_string(),
                self.stderr[i].to_string(),
                self.dev_over_stderr[i].to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidConfig(format!("CSV output failed: {e}")))?;
        Ok(())
    }
}
