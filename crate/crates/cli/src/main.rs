//! `imax`: smooth max-mutual information from the command line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use imax_core::conic::sdpa::write_sdpa;
use imax_core::conic::ConicProblem;
use imax_core::generators::{generate_state, StateKind};
use imax_core::oracle;
use imax_core::programs::{self, RankCondition};
use imax_core::seesaw::{self, SeesawConfig, SeesawObserver, SeesawStatus};
use imax_core::state::check_epsilon;
use imax_core::{BipartiteState, Tolerances};

use imax_cli::report::{self, InputDescription, OracleComparison, RankCheckReport, RunReport};

const GENERATOR_HELP: &str = "\
Generator specs (name:arg1:arg2...):
  bell:d                    maximally entangled state on d x d
  isotropic:d:p             p*Phi+ + (1-p)*1/d^2
  werner:d:p                Werner state, p = antisymmetric weight
  maxmixed:dA:dB            maximally mixed state
  product:F:dA:dB           F in {maxmixed, ket0, random} on both factors
  random_pure:dA:dB         Gaussian pure state (uses --seed)
  random_mixed:dA:dB:rank   normalized Wishart draw (uses --seed)";

#[derive(Debug, Parser)]
#[command(name = "imax", version, about = "Smooth max-mutual information of bipartite quantum states", after_help = GENERATOR_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the seesaw and report I_max^eps.
    #[command(after_help = GENERATOR_HELP)]
    Compute(ComputeArgs),
    /// Test whether rho_A (x) rho~_B stays positive definite over the ball.
    #[command(after_help = GENERATOR_HELP)]
    CheckRank(CheckRankArgs),
    /// Write a generated state as JSON.
    #[command(after_help = GENERATOR_HELP)]
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// State JSON file.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Generator spec, e.g. bell:2 or random_mixed:2:2:4.
    #[arg(long, value_name = "SPEC")]
    generator: Option<String>,
}

#[derive(Debug, Args)]
struct Common {
    /// Smoothing radius in [0, 1].
    #[arg(long)]
    epsilon: f64,
    /// Seed for the random generator families.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    common: Common,
    /// Stop once the step-3 margin falls to this value [default: 1e-7].
    #[arg(long)]
    mu_tol: Option<f64>,
    /// Round limit [default: 100].
    #[arg(long)]
    max_iters: Option<usize>,
    /// Solver feasibility tolerance [default: 1e-8].
    #[arg(long, env = "IMAX_SOLVER_TOL")]
    solver_tol: Option<f64>,
    /// Solve the step-3 dual every round and check the duality gap (default).
    #[arg(long, overrides_with = "no_certify")]
    certify: bool,
    #[arg(long, overrides_with = "certify")]
    no_certify: bool,
    /// Also run the bisection oracle and report the difference.
    #[arg(long)]
    oracle: bool,
    /// Bracket width at which the oracle stops.
    #[arg(long, default_value_t = 1e-6)]
    precision: f64,
    /// Write every conic program as SDPA sparse format into DIR.
    #[arg(long, value_name = "DIR")]
    dump_sdp: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckRankArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct GenArgs {
    spec: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const UPPER_BOUND_ONLY: u8 = 2;
    pub const INCONCLUSIVE: u8 = 2;
    pub const MAX_ITERS: u8 = 3;
    pub const RANK_FAILS: u8 = 3;
    pub const SOLVER: u8 = 4;
}

/// A diagnostic and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: exit::USAGE, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    let outcome = match cli.command {
        Command::Compute(args) => compute(args),
        Command::CheckRank(args) => check_rank(args),
        Command::Gen(args) => generate(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("imax: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_state(source: &Source, seed: u64, tol: &Tolerances) -> Result<(BipartiteState, InputDescription), Failure> {
    match (&source.input, &source.generator) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
            let state = BipartiteState::from_json(&text, tol)
                .map_err(|e| Failure::usage(format!("invalid state in {}: {e}", path.display())))?;
            Ok((state, InputDescription::File { path: path.display().to_string() }))
        }
        (None, Some(spec)) => {
            let state = StateKind::parse(spec, seed)
                .and_then(|k| generate_state(&k))
                .map_err(|e| Failure::usage(e.to_string()))?;
            Ok((state, InputDescription::Generator { spec: spec.clone(), seed }))
        }
        _ => Err(Failure::usage("exactly one of --input or --generator is required")),
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = imax_core::json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

struct SdpDump {
    dir: PathBuf,
    error: Option<String>,
}

impl SeesawObserver for SdpDump {
    fn on_problem(&mut self, label: &str, problem: &ConicProblem) {
        if self.error.is_some() {
            return;
        }
        let path = self.dir.join(format!("{label}.dat-s"));
        if let Err(e) = fs::write(&path, write_sdpa(problem)) {
            self.error = Some(format!("cannot write {}: {e}", path.display()));
        }
    }
}

struct Silent;

impl SeesawObserver for Silent {}

fn compute(args: ComputeArgs) -> Result<u8, Failure> {
    let started_at = report::now();
    let eps = args.common.epsilon;
    check_epsilon(eps).map_err(|e| Failure::usage(e.to_string()))?;
    let mut config = SeesawConfig::new(eps);
    if let Some(v) = args.mu_tol {
        config.mu_tol = v;
    }
    if let Some(v) = args.max_iters {
        config.max_iters = v;
    }
    if let Some(v) = args.solver_tol {
        config.tolerances.solver_tol = v;
    }
    config.certify = !args.no_certify || args.certify;
    config.validate().map_err(|e| Failure::usage(e.to_string()))?;
    if args.oracle && eps == 0.0 {
        return Err(Failure::usage("--oracle needs --epsilon > 0"));
    }
    if args.oracle && !(args.precision > 0.0 && args.precision.is_finite()) {
        return Err(Failure::usage("--precision must be positive"));
    }
    let (state, input) = load_state(&args.source, args.common.seed, &config.tolerances)?;

    let mut dump = match &args.dump_sdp {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
            Some(SdpDump { dir: dir.clone(), error: None })
        }
        None => None,
    };

    let settings = config.solver_settings();
    let (result, bisection) = std::thread::scope(|scope| {
        let oracle_run = args
            .oracle
            .then(|| scope.spawn(|| oracle::bisection_oracle(&state, eps, args.precision, &settings)));
        let observer: &mut dyn SeesawObserver = match dump.as_mut() {
            Some(d) => d,
            None => &mut Silent,
        };
        let result = seesaw::run_seesaw_observed(&state, &config, observer);
        let bisection = oracle_run.map(|h| h.join().expect("oracle thread panicked"));
        (result, bisection)
    });
    if let Some(err) = dump.and_then(|d| d.error) {
        return Err(Failure::usage(err));
    }
    let result = result.map_err(|e| Failure { code: exit::SOLVER, message: e.to_string() })?;
    let oracle = match bisection {
        Some(Ok(b)) => Some(OracleComparison {
            lambda_star: b.lambda_star,
            imax: b.lambda_star.log2(),
            bracket_width: b.bracket_width,
            feasibility_calls: b.feasibility_calls,
            precision: args.precision,
            difference: result.imax - b.lambda_star.log2(),
        }),
        Some(Err(e)) => return Err(Failure { code: exit::SOLVER, message: format!("oracle: {e}") }),
        None => None,
    };

    let report = RunReport::new(input, &config, &result, oracle, started_at);
    let text = match args.common.format {
        Format::Json => to_json(&report),
        Format::Text => report.to_text(),
    };
    emit(&text, args.common.output.as_deref())?;
    Ok(match result.status {
        SeesawStatus::ConvergedCertified | SeesawStatus::ConvergedUncertified => exit::OK,
        SeesawStatus::UpperBoundOnly => exit::UPPER_BOUND_ONLY,
        SeesawStatus::MaxItersReached => exit::MAX_ITERS,
    })
}

fn check_rank(args: CheckRankArgs) -> Result<u8, Failure> {
    let started_at = report::now();
    let eps = args.common.epsilon;
    check_epsilon(eps).map_err(|e| Failure::usage(e.to_string()))?;
    let tol = Tolerances::default();
    let (state, input) = load_state(&args.source, args.common.seed, &tol)?;
    let r = programs::rank_condition(&state, eps, &tol).map_err(|e| Failure::usage(e.to_string()))?;
    let report = RankCheckReport::new(input, (state.dim_a(), state.dim_b()), eps, &r, started_at);
    let text = match args.common.format {
        Format::Json => to_json(&report),
        Format::Text => report.to_text(),
    };
    emit(&text, args.common.output.as_deref())?;
    Ok(match r.condition {
        RankCondition::Holds => exit::OK,
        RankCondition::Inconclusive => exit::INCONCLUSIVE,
        RankCondition::Fails => exit::RANK_FAILS,
    })
}

fn generate(args: GenArgs) -> Result<u8, Failure> {
    let state = StateKind::parse(&args.spec, args.seed)
        .and_then(|k| generate_state(&k))
        .map_err(|e| Failure::usage(e.to_string()))?;
    let mut text = state.to_json();
    text.push('\n');
    emit(&text, args.output.as_deref())?;
    Ok(exit::OK)
}
