//! `irs`: runs the estimation and beamforming experiments and a few
//! single-shot utilities.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irs_core::beamforming::{
    rotate_and_quantize, sdr_initialization, sinr_upper_bound, successive_refinement, BeamformingProblem,
    DEFAULT_RANDOMIZATION_SAMPLES, DEFAULT_REFINE_EPS, DEFAULT_SDP_TOL,
};
use irs_core::experiment::{self, Experiment, ExperimentConfig};
use irs_core::training::{design_pattern, PhaseShiftSet};
use irs_core::{ComplexMatrix, ComplexVector, Error, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "irs", version, about = "IRS channel estimation and discrete-phase beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic training MSE versus number of groups.
    MseSweep(RunArgs),
    /// Monte-Carlo rate versus number of groups.
    RateVsGroups(RunArgs),
    /// Monte-Carlo rate versus number of elements.
    RateVsElements(RunArgs),
    /// Print the designed training pattern for `M` groups as CSV.
    Pattern {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        b: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize one reflection vector from a JSON problem description.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the Gaussian randomization.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

/// Input of `solve`. Complex numbers are `[re, im]` pairs.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveInput {
    h_tilde: Vec<[f64; 2]>,
    r_p: Vec<Vec<[f64; 2]>>,
    pt: f64,
    sigma2: f64,
    bits: u32,
}

#[derive(Serialize)]
struct SolveOutput {
    levels: Vec<usize>,
    theta: Vec<[f64; 2]>,
    sinr: f64,
    sinr_upper_bound: f64,
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_failure(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            serde_json::from_str(&text).map_err(|e| io_failure(path, e))?
        }
        None => ExperimentConfig::defaults_for(experiment),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    Ok(config)
}

fn run_experiment(experiment: Experiment, args: &RunArgs) -> Result<(), Failure> {
    let config = load_config(experiment, args)?;
    config.validate(experiment)?;
    let rows = experiment::run(experiment, &config)?;
    let out = output(args.out.as_deref())?;
    experiment::write_csv(&rows, out)?;
    Ok(())
}

/// `re+imj` with negative zeros printed as zeros.
fn format_complex(z: C64) -> String {
    let clean = |v: f64| if v == 0.0 { 0.0 } else { v };
    format!("{}{:+}j", clean(z.re), clean(z.im))
}

fn pattern(m: usize, b: u32, out: Option<&Path>) -> Result<(), Failure> {
    if m == 0 {
        return Err(Failure::Input("--m must be at least 1".into()));
    }
    let pattern = design_pattern(m, PhaseShiftSet::new(b)?);
    let matrix = pattern.matrix();
    let mut w = csv::Writer::from_writer(output(out)?);
    for i in 0..matrix.rows() {
        let row: Vec<String> = (0..matrix.cols()).map(|j| format_complex(matrix[(i, j)])).collect();
        w.write_record(&row).map_err(|e| Failure::Input(format!("CSV output: {e}")))?;
    }
    w.flush().map_err(|e| Failure::Input(format!("CSV output: {e}")))?;
    Ok(())
}

fn complex(pair: &[f64; 2]) -> C64 {
    C64::new(pair[0], pair[1])
}

fn solve(input: &Path, out: Option<&Path>, seed: u64) -> Result<(), Failure> {
    let text = std::fs::read_to_string(input).map_err(|e| io_failure(input, e))?;
    let problem: SolveInput = serde_json::from_str(&text).map_err(|e| io_failure(input, e))?;
    let n = problem.h_tilde.len();
    if problem.r_p.len() != n || problem.r_p.iter().any(|row| row.len() != n) {
        return Err(Failure::Input(format!("r_p must be {n}x{n} to match h_tilde")));
    }
    let h: ComplexVector = problem.h_tilde.iter().map(complex).collect();
    let r_p = ComplexMatrix::from_fn(n, n, |i, j| complex(&problem.r_p[i][j]));
    let set = PhaseShiftSet::new(problem.bits)?;
    let prob = BeamformingProblem::new(h, r_p, problem.pt, problem.sigma2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = sdr_initialization(&prob, DEFAULT_RANDOMIZATION_SAMPLES, DEFAULT_SDP_TOL, &mut rng)?;
    let start = rotate_and_quantize(&init.continuous, set);
    let theta = successive_refinement(&start, &prob, set, DEFAULT_REFINE_EPS)?;
    let result = SolveOutput {
        levels: theta.levels().expect("refined vector is discrete"),
        theta: theta.theta().iter().map(|z| [z.re, z.im]).collect(),
        sinr: prob.sinr(&theta),
        sinr_upper_bound: sinr_upper_bound(&prob)?,
    };
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, &result).map_err(|e| Failure::Input(format!("JSON output: {e}")))?;
    writeln!(w).map_err(|e| Failure::Input(format!("JSON output: {e}")))?;
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::MseSweep(args) => run_experiment(Experiment::MseSweep, &args),
        Command::RateVsGroups(args) => run_experiment(Experiment::RateVsGroups, &args),
        Command::RateVsElements(args) => run_experiment(Experiment::RateVsElements, &args),
        Command::Pattern { m, b, out } => pattern(m, b, out.as_deref()),
        Command::Solve { input, out, seed } => solve(&input, out.as_deref(), seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
