use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use qmobius_core::BitString;
use serde::Serialize;

mod search;
mod values;
mod verify;

#[derive(Parser, Debug)]
#[command(name = "qmobius", version, about = "Simulated quantum circuits for subset transforms, marginals and minimum finding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate f(x) = sum over x- <= x of |psi-(x-)|^2.
    Mobius(ValueArgs),
    /// Evaluate the marginal of the low n0 bits.
    Marginal(ValueArgs),
    /// Locate the minimum of an objective by bit-fixing on D.
    Minfind(MinfindArgs),
    /// Run the invariant suite on seeded random specs.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ValueArgs {
    /// Probability table `{"n", "values"}` or a full spec `{"mode", "n", "n0", "psi_minus", "x"}`.
    #[arg(long, value_name = "PATH", required_unless_present = "check")]
    input: Option<PathBuf>,
    /// Evaluation point, most significant bit first.
    #[arg(long, value_name = "BITSTRING", conflicts_with = "sweep")]
    x: Option<BitString>,
    /// Evaluate every point.
    #[arg(long)]
    sweep: bool,
    #[arg(long, value_name = "INT")]
    n0: Option<usize>,
    /// Also estimate each value from this many simulated measurements.
    #[arg(long, value_name = "INT")]
    shots: Option<u64>,
    /// Point x is sampled with seed + dec(x).
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write the prepared |s> for a single point.
    #[arg(long, value_name = "PATH", conflicts_with = "sweep")]
    dump_state: Option<PathBuf>,
    /// Recompute a previous `--out` report and compare.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["input", "x", "sweep", "n0", "shots", "dump_state"])]
    check: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum EvaluatorKind {
    Classical,
    Exact,
    Sampled,
}

#[derive(Args, Debug)]
struct MinfindArgs {
    /// Objective table `{"n", "values"}` with positive entries.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["n", "center"])]
    input: Option<PathBuf>,
    /// Bits of the builtin objective (dec(x) - center)^2 + 1.
    #[arg(long, value_name = "INT", requires = "center")]
    n: Option<usize>,
    #[arg(long, value_name = "REAL", requires = "n", allow_hyphen_values = true)]
    center: Option<f64>,
    /// Defaults to the smallest beta giving a 50-nat margin.
    #[arg(long, value_name = "REAL")]
    beta: Option<f64>,
    #[arg(long, value_name = "REAL", default_value_t = qmobius_core::minfind::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = EvaluatorKind::Exact)]
    evaluator: EvaluatorKind,
    /// Shots per probe; sampled evaluator only.
    #[arg(long, value_name = "INT")]
    shots: Option<u64>,
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Rerun a previous `--out` report with its stored settings and compare.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["input", "n", "center", "beta", "shots", "evaluator", "threshold", "seed"])]
    check: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Fault {
    FlipControl,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_name = "INT", default_value_t = 0)]
    seed: u64,
    /// Random specs per family.
    #[arg(long, value_name = "INT", default_value_t = 8)]
    cases: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
}

/// Failure classes that map onto exit codes.
#[derive(Debug)]
enum Failure {
    Invalid(anyhow::Error),
    Io(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        if err.chain().any(|e| e.is::<std::io::Error>()) {
            Failure::Io(err)
        } else {
            Failure::Invalid(err)
        }
    }
}

impl From<qmobius_core::Error> for Failure {
    fn from(err: qmobius_core::Error) -> Self {
        Failure::Invalid(err.into())
    }
}

type CliResult<T> = Result<T, Failure>;

fn invalid(msg: impl std::fmt::Display) -> Failure {
    Failure::Invalid(anyhow::anyhow!("{msg}"))
}

fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: malformed JSON: {e}", path.display())))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, value: serde_json::Value) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(invalid)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// `Ok(false)` means the command ran but found a validation failure it already reported.
fn run(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Mobius(args) => values::run(qmobius_core::Mode::Mobius, args),
        Command::Marginal(args) => values::run(qmobius_core::Mode::Marginal, args),
        Command::Minfind(args) => search::run(args),
        Command::Verify(args) => verify::run(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Invalid(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
        Err(Failure::Io(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
