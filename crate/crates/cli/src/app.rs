//! Command-line surface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ergomoment::{FiniteMarkovModel, Matrix, NormKind, Observable, SystemConfig, SystemSpec};
use serde::Deserialize;
use serde_json::Value;

use crate::config::*;
use crate::error::{CliError, CliResult};
use crate::report::canonical_pretty;
use crate::{configure_threads, run_preset, RunOutput, EXIT_CHECK_FAILED, EXIT_ERROR};

#[derive(Debug, Parser)]
#[command(name = "ergomoment", version, about = "Fourth moments of partial sums for ergodic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit and check the ergodicity certificate (kappa, theta) of a finite chain.
    Spectral(SpectralArgs),
    /// Exact computations on finite chains.
    Oracle {
        #[command(subcommand)]
        command: OracleCommand,
    },
    /// Monte Carlo estimates.
    Mc {
        #[command(subcommand)]
        command: McCommand,
    },
    /// Bound, ledger, normal-limit and tightness checks.
    Verify {
        #[command(subcommand)]
        command: VerifyCommand,
    },
    /// Same as `verify ledger`.
    Ledger(LedgerArgs),
    /// Same as `verify clt`.
    Clt(CltArgs),
    /// Same as `verify tightness`.
    Tightness(TightnessArgs),
    /// Run a preset file.
    Run(RunArgs),
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Exact E[S_n^4] by the gap expansion.
    S4(OracleS4Args),
}

#[derive(Debug, Subcommand)]
pub enum McCommand {
    /// Replicate estimate of E[S_n^4].
    S4(McS4Args),
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Fourth moment against the log-norm bound over horizons.
    Bound(BoundArgs),
    /// Term-by-term inequality ledger on a finite chain.
    Ledger(LedgerArgs),
    /// Normal-limit diagnostics of S_n / (sigma sqrt n).
    Clt(CltArgs),
    /// Interval-count fourth moments against C(n delta + n^2 delta^2).
    Tightness(TightnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum NormArg {
    #[default]
    Sup,
    Bv,
    Lipschitz,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Sup => NormKind::Sup,
            NormArg::Bv => NormKind::Bv,
            NormArg::Lipschitz => NormKind::Lipschitz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ModeArg {
    #[default]
    Exact,
    Mc,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; `json` or `csv` alone selects that format on stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    /// Finite model or `finite`/`ulam` system config (JSON).
    #[arg(long, visible_alias = "system")]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub norm: NormArg,
    #[arg(long, default_value_t = 64)]
    pub horizon: usize,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Observable whose probe closure replaces the state indicators.
    #[arg(long)]
    pub obs: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub cutoff: usize,
    #[arg(long)]
    pub expect_theta: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OracleS4Args {
    #[arg(long, visible_alias = "system")]
    pub model: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    /// Horizons, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct McS4Args {
    #[arg(long, visible_alias = "model")]
    pub system: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Reference value the estimate must cover within three standard errors.
    #[arg(long)]
    pub expect: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, visible_alias = "model")]
    pub system: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub mode: ModeArg,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Required with `--mode mc`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct LedgerArgs {
    #[arg(long, visible_alias = "system")]
    pub model: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub cutoff: usize,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub norm: NormArg,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CltArgs {
    #[arg(long, visible_alias = "model")]
    pub system: PathBuf,
    #[arg(long)]
    pub obs: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Asymptotic variance; Green–Kubo on finite chains when omitted.
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TightnessArgs {
    #[arg(long, visible_alias = "model")]
    pub system: PathBuf,
    /// Interval `s,t`; repeat for a grid.
    #[arg(long = "interval", value_parser = parse_interval, required = true)]
    pub intervals: Vec<[f64; 2]>,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub reps: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0)]
    pub c: f64,
    /// Also compare each row with the independent-draw binomial value.
    #[arg(long)]
    pub binomial: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub preset: PathBuf,
    /// Directory for report.json, report.meta.json and CSV tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
}

fn parse_interval(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `s,t`, got `{s}`"))?;
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    Ok([parse(a)?, parse(b)?])
}

fn read_json(path: &Path, what: &str) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::from_json(what, e))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(rename = "P")]
    p: Matrix,
    #[serde(default)]
    states: Option<Vec<Value>>,
    #[serde(default)]
    positions: Option<Vec<f64>>,
    #[serde(default)]
    nu: Option<Vec<f64>>,
}

/// A system config (`{"kind": ...}`) or a bare finite model
/// (`{"P": ..., "states"?, "positions"?, "nu"?}`). A supplied `nu` is
/// validated and then re-solved.
pub fn load_system(path: &Path) -> CliResult<SystemConfig> {
    let value = read_json(path, "system")?;
    if value.get("kind").is_some() {
        return serde_json::from_value(value).map_err(|e| CliError::from_json("system", e));
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| CliError::from_json("model", e))?;
    let states = file.states.map(|labels| {
        labels
            .into_iter()
            .map(|v| match v {
                Value::String(s) => s,
                other => other.to_string(),
            })
            .collect::<Vec<_>>()
    });
    let config = SystemConfig::new(
        SystemSpec::Finite {
            p: file.p.clone(),
            states: states.clone(),
            positions: file.positions,
        },
        0,
    );
    // Surfaces stochasticity errors before any stationary-vector complaint.
    config.build()?;
    if let Some(nu) = file.nu {
        let labels = states.unwrap_or_else(|| (0..file.p.rows()).map(|i| i.to_string()).collect());
        FiniteMarkovModel::new(labels, file.p, Some(nu))?;
    }
    Ok(config)
}

pub fn load_observable(path: &Path) -> CliResult<Observable> {
    serde_json::from_value(read_json(path, "observable")?).map_err(|e| CliError::from_json("observable", e))
}

/// Parses `args` and runs; returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads().and_then(|_| execute(cli.command)) {
        Ok(true) => 0,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            EXIT_ERROR
        }
    }
}

/// Runs one command; `Ok(passed)` when it completed.
pub fn execute(command: Command) -> CliResult<bool> {
    match command {
        Command::Run(args) => run_command(args),
        Command::Spectral(a) => {
            let observable = a.obs.as_deref().map(load_observable).transpose()?;
            let task = Task::Spectral(SpectralTask {
                system: load_system(&a.model)?,
                norm: a.norm.into(),
                horizon: a.horizon,
                p: a.p,
                observable,
                cutoff: a.cutoff,
                expect_theta: a.expect_theta,
                tolerance: a.tol,
            });
            single("spectral", 0, task, &a.output)
        }
        Command::Oracle {
            command: OracleCommand::S4(a),
        } => {
            let task = Task::OracleS4(OracleS4Task {
                system: load_system(&a.model)?,
                observable: load_observable(&a.obs)?,
                n: a.n,
                expect_polynomial: None,
                rel_tol: 1e-9,
            });
            single("oracle-s4", 0, task, &a.output)
        }
        Command::Mc {
            command: McCommand::S4(a),
        } => {
            let task = Task::McS4(McS4Task {
                system: load_system(&a.system)?,
                observable: load_observable(&a.obs)?,
                n: a.n,
                reps: a.reps,
                expect: a.expect,
                z: 3.0,
            });
            single("mc-s4", a.seed, task, &a.output)
        }
        Command::Verify {
            command: VerifyCommand::Bound(a),
        } => {
            let mode = match a.mode {
                ModeArg::Exact => BoundModeKind::Exact,
                ModeArg::Mc => BoundModeKind::Mc,
            };
            let seed = match (mode, a.seed) {
                (BoundModeKind::Mc, None) => {
                    return Err(CliError::input("E_USAGE", "--seed is required with --mode mc"))
                }
                (_, s) => s.unwrap_or(0),
            };
            let task = Task::Bound(BoundTask {
                system: load_system(&a.system)?,
                observable: load_observable(&a.obs)?,
                n: a.n,
                mode,
                reps: a.reps,
                stabilization: None,
            });
            single("verify-bound", seed, task, &a.output)
        }
        Command::Verify {
            command: VerifyCommand::Ledger(a),
        }
        | Command::Ledger(a) => {
            let task = Task::Ledger(LedgerTask {
                system: load_system(&a.model)?,
                observable: load_observable(&a.obs)?,
                norm: a.norm.into(),
                cutoff: a.cutoff,
                horizon: a.horizon,
                p: a.p,
            });
            single("verify-ledger", 0, task, &a.output)
        }
        Command::Verify {
            command: VerifyCommand::Clt(a),
        }
        | Command::Clt(a) => {
            let task = Task::Clt(CltTask {
                system: load_system(&a.system)?,
                observable: load_observable(&a.obs)?,
                n: a.n,
                reps: a.reps,
                sigma2: a.sigma2,
                p: a.p,
                thresholds: CltThresholds::default(),
            });
            single("verify-clt", a.seed, task, &a.output)
        }
        Command::Verify {
            command: VerifyCommand::Tightness(a),
        }
        | Command::Tightness(a) => {
            let task = Task::Tightness(TightnessTask {
                system: load_system(&a.system)?,
                intervals: a.intervals,
                n: a.n,
                reps: a.reps,
                reference_c: a.c,
                reference: a.binomial.then_some(TightnessReference::Binomial),
            });
            single("verify-tightness", a.seed, task, &a.output)
        }
    }
}

fn single(name: &str, seed: u64, task: Task, output: &OutputArgs) -> CliResult<bool> {
    let preset = Preset::single(name, seed, task)?;
    let out = run_preset(&preset)?;
    summarize(&out);
    let (path, format) = match (&output.out, output.format) {
        (Some(p), None) if p.as_os_str() == "csv" => (None, Format::Csv),
        (Some(p), None) if p.as_os_str() == "json" => (None, Format::Json),
        (p, f) => (p.clone(), f.unwrap_or_default()),
    };
    let body = render(&out, format)?;
    match path {
        None => print(&body)?,
        Some(path) => {
            write(&path, &body)?;
            write(&path.with_extension(meta_extension(&path)), &canonical_pretty(&out.meta))?;
        }
    }
    Ok(out.passed)
}

fn meta_extension(path: &Path) -> String {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{ext}.meta.json"),
        None => "meta.json".into(),
    }
}

fn run_command(a: RunArgs) -> CliResult<bool> {
    let mut preset = Preset::load(&a.preset)?;
    preset.apply(&Overrides {
        seed: a.seed,
        reps: a.reps,
        n: a.n,
        cutoff: a.cutoff,
        horizon: a.horizon,
    })?;
    let out = run_preset(&preset)?;
    summarize(&out);
    match &a.out {
        None => print(&render(&out, a.format.unwrap_or_default())?)?,
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            write(&dir.join("report.json"), &canonical_pretty(&out.report))?;
            write(&dir.join("report.meta.json"), &canonical_pretty(&out.meta))?;
            for (label, table) in &out.tables {
                write(&dir.join(format!("{label}.csv")), &table.to_csv()?)?;
            }
        }
    }
    Ok(out.passed)
}

fn render(out: &RunOutput, format: Format) -> CliResult<String> {
    match format {
        Format::Json => Ok(canonical_pretty(&out.report)),
        Format::Csv if out.tables.len() == 1 => out.tables[0].1.to_csv(),
        Format::Csv => {
            let mut s = String::new();
            for (label, table) in &out.tables {
                s.push_str(&format!("# {label}\n"));
                s.push_str(&table.to_csv()?);
            }
            Ok(s)
        }
    }
}

/// One line per check on stderr.
fn summarize(out: &RunOutput) {
    let Some(tasks) = out.report["tasks"].as_array() else {
        return;
    };
    for task in tasks {
        for check in task["checks"].as_array().into_iter().flatten() {
            let status = if check["passed"].as_bool() == Some(true) { "PASS" } else { "FAIL" };
            eprintln!(
                "{status} task {} {} {}: {}",
                task["index"],
                task["kind"].as_str().unwrap_or(""),
                check["name"].as_str().unwrap_or(""),
                check["detail"].as_str().unwrap_or("")
            );
        }
    }
}

fn print(body: &str) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    stdout
        .write_all(body.as_bytes())
        .map_err(|e| CliError::io("<stdout>", e))
}

fn write(path: &Path, body: &str) -> CliResult<()> {
    std::fs::write(path, body).map_err(|e| CliError::io(path, e))
}
