//! The `qms` command-line front end.
//!
//! Exit codes: 0 ok, 1 comparison failed, 2 invalid input, 3 parse error,
//! 4 obstructed.

mod commands;
pub mod format;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::linalg::Tolerance;
use crate::trajectories::Mode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_OBSTRUCTED: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Obstructed { .. } => EXIT_OBSTRUCTED,
            _ => EXIT_INVALID,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qms",
    version,
    about = "Quantum Markov semigroup analysis and simulation"
)]
pub struct Cli {
    /// Absolute tolerance for every numerical check.
    #[arg(
        long,
        global = true,
        env = "QMS_TOL",
        default_value_t = 1e-9,
        allow_negative_numbers = true
    )]
    pub tol: f64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a JSON analysis report for a model.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve a density matrix and write the entries as CSV.
    Evolve {
        #[arg(long)]
        model: PathBuf,
        /// JSON matrix file, or `maximally-mixed`.
        #[arg(long, default_value = "maximally-mixed")]
        state: String,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo average of the classical section against the exact semigroup.
    Simulate(SimulateArgs),
    /// Rewrite a model in an equivalent representation.
    Transform(TransformArgs),
    /// Series product or concatenation of two models.
    Compose(ComposeArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub traj: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 10)]
    pub steps: usize,
    /// Upper bound on the split-step size.
    #[arg(long, default_value_t = 1e-2)]
    pub dt: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    /// Compare against the generator with every jump rate set to this value.
    #[arg(long)]
    pub expect_rate: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Trotter,
    Auto,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Exact => Mode::ExactCommuting,
            ModeArg::Trotter => Mode::Trotterized,
            ModeArg::Auto => Mode::Auto,
        }
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("kind").required(true).args(["self_adjoint", "center", "euclidean"])))]
pub struct TransformArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Hermitian couplings diagonal in the stable basis.
    #[arg(long)]
    pub self_adjoint: bool,
    /// Center on a state file; the maximally mixed state when no file is given.
    #[arg(long, value_name = "STATE", num_args = 0..=1, default_missing_value = "maximally-mixed")]
    pub center: Option<String>,
    /// JSON file `{"T": matrix, "beta": [complex], "e": real}`.
    #[arg(long, value_name = "PATH")]
    pub euclidean: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("op").required(true).args(["series", "concat"])))]
pub struct ComposeArgs {
    /// `A ◁ B`: the output of A feeds B.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub series: Option<Vec<PathBuf>>,
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub concat: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let tol = Tolerance::new(cli.tol, Tolerance::default().rel_tol)?;
    match &cli.command {
        Command::Analyze { model, out } => commands::analyze(model, out.as_deref(), tol),
        Command::Evolve {
            model,
            state,
            tmax,
            steps,
            out,
        } => commands::evolve(model, state, *tmax, *steps, out.as_deref(), tol),
        Command::Simulate(args) => commands::simulate(args, tol),
        Command::Transform(args) => commands::transform(args, tol),
        Command::Compose(args) => commands::compose(args, tol),
    }
}
