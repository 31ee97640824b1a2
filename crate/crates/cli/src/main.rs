//! `seqstat`: batch front end. Model descriptions in, tables out.
//!
//! Exit status: 0 on success, 2 on invalid input, 3 on numerical failure
//! (dark or degenerate steady states, singular matrices).

mod config;
mod output;
mod reproduce;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use config::{Format, Grid, Initial, Method, ModelArgs, RunConfig};
use output::Report;
use reproduce::Target;

#[derive(Parser)]
#[command(
    name = "seqstat",
    version,
    about = "Statistics of sequential measurement strings"
)]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady state of the summed instrument.
    Steady(ModelOnly),
    /// Psi matrix of L-sequences (asymptotic, or at string length N).
    Psi(Sequences),
    /// Covariance decomposition of the ED-L.
    Covariance(Sequences),
    /// Correlation information, optionally over a parameter grid.
    CorrInfo(Sweep),
    /// Relative entropy to order-k Markov surrogates.
    MarkovInfo(MarkovArgs),
    /// Fisher information of the ED about one model parameter.
    Fisher(FisherArgs),
    /// Sample strings and summarize their EDs.
    Sample(SampleArgs),
    /// In/out constraints and compression of a single string's ED.
    Constraints(ConstraintArgs),
    /// Tables behind the figures.
    Reproduce(ReproduceArgs),
    /// Emit or validate instrument JSON.
    Instrument {
        #[command(subcommand)]
        action: InstrumentAction,
    },
    /// Run the task named in the configuration file.
    Run,
}

#[derive(Subcommand)]
enum InstrumentAction {
    /// Write the instrument as JSON.
    Emit(ModelOnly),
    /// Validate an instrument and report residuals.
    Check(ModelOnly),
}

#[derive(Args)]
struct ModelOnly {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct Sequences {
    #[command(flatten)]
    model: ModelArgs,
    /// Sequence length.
    #[arg(long = "L")]
    l: Option<usize>,
    /// String length; selects the finite-N Psi and the scaled covariance.
    #[arg(long = "N")]
    n: Option<usize>,
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    model: ModelArgs,
    /// Model parameter to sweep.
    #[arg(long)]
    param: Option<String>,
    /// `a,b,c`, `from:to:points` or `log:from:to:points`.
    #[arg(long, value_parser = Grid::parse, allow_hyphen_values = true)]
    grid: Option<Grid>,
}

#[derive(Args)]
struct MarkovArgs {
    #[command(flatten)]
    sweep: Sweep,
    /// Sequence lengths, e.g. `1,2,3`.
    #[arg(long = "L", value_delimiter = ',')]
    l: Option<Vec<usize>>,
    /// Markov orders, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
}

#[derive(Args)]
struct FisherArgs {
    #[command(flatten)]
    sweep: Sweep,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Finite-difference step relative to `max(|theta|, 1)`.
    #[arg(long)]
    rel_step: Option<f64>,
    #[arg(long)]
    richardson: bool,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long, value_enum)]
    initial: Option<Initial>,
    /// Output the sampled strings instead of ED moments.
    #[arg(long)]
    strings: bool,
}

#[derive(Args)]
struct ConstraintArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// The measurement string (labels, or digits without a model).
    #[arg(long)]
    string: Option<String>,
    /// File holding the string.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long = "L")]
    l: Option<usize>,
    /// Symbol whose leading sequences are dropped by compression.
    #[arg(long)]
    drop_symbol: Option<String>,
    /// Alphabet size for digit strings.
    #[arg(long)]
    alphabet_size: Option<usize>,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    target: Target,
    /// Chain lengths (fig6 .. fig9).
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<usize>>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
}

fn task(name: &str) -> Option<String> {
    Some(name.to_string())
}

/// Command-line values as a configuration overlay, plus model flags.
fn overlay(command: &Command) -> (RunConfig, Option<&ModelArgs>) {
    let mut c = RunConfig::default();
    let model = match command {
        Command::Steady(a) => {
            c.task = task("steady");
            Some(&a.model)
        }
        Command::Psi(a) | Command::Covariance(a) => {
            c.task = task(if matches!(command, Command::Psi(_)) {
                "psi"
            } else {
                "covariance"
            });
            c.l = a.l.map(|l| vec![l]);
            c.n = a.n;
            Some(&a.model)
        }
        Command::CorrInfo(a) => {
            c.task = task("corr-info");
            c.param = a.param.clone();
            c.grid = a.grid.clone();
            Some(&a.model)
        }
        Command::MarkovInfo(a) => {
            c.task = task("markov-info");
            c.param = a.sweep.param.clone();
            c.grid = a.sweep.grid.clone();
            c.l = a.l.clone();
            c.k = a.k.clone();
            Some(&a.sweep.model)
        }
        Command::Fisher(a) => {
            c.task = task("fisher");
            c.param = a.sweep.param.clone();
            c.grid = a.sweep.grid.clone();
            c.l = a.l.map(|l| vec![l]);
            c.n = a.n;
            c.rel_step = a.rel_step;
            c.richardson = a.richardson.then_some(true);
            Some(&a.sweep.model)
        }
        Command::Sample(a) => {
            c.task = task("sample");
            c.n = a.n;
            c.runs = a.runs;
            c.l = a.l.map(|l| vec![l]);
            c.method = a.method;
            c.initial = a.initial;
            c.strings = a.strings.then_some(true);
            Some(&a.model)
        }
        Command::Constraints(a) => {
            c.task = task("constraints");
            c.string = a.string.clone();
            c.input = a.input.clone();
            c.l = a.l.map(|l| vec![l]);
            c.drop_symbol = a.drop_symbol.clone();
            c.alphabet_size = a.alphabet_size;
            Some(&a.model)
        }
        Command::Reproduce(a) => {
            c.task = task("reproduce");
            c.target = Some(format!("{:?}", a.target).to_lowercase());
            c.sites = a.sites.clone();
            c.n = a.n;
            c.runs = a.runs;
            None
        }
        Command::Instrument { action } => {
            let (name, a) = match action {
                InstrumentAction::Emit(a) => ("instrument-emit", a),
                InstrumentAction::Check(a) => ("instrument-check", a),
            };
            c.task = task(name);
            Some(&a.model)
        }
        Command::Run => None,
    };
    (c, model)
}

fn dispatch(cfg: &RunConfig) -> Result<Report> {
    let Some(name) = cfg.task.as_deref() else {
        bail!("no task given")
    };
    match name {
        "steady" => tasks::steady(cfg),
        "psi" => tasks::psi(cfg),
        "covariance" => tasks::covariance(cfg),
        "corr-info" => tasks::corr_info(cfg),
        "markov-info" => tasks::markov_info(cfg),
        "fisher" => tasks::fisher(cfg),
        "sample" => tasks::sample(cfg),
        "constraints" => tasks::constraints(cfg),
        "reproduce" => reproduce::run(cfg),
        "instrument-emit" => tasks::instrument_emit(cfg),
        "instrument-check" => tasks::instrument_check(cfg),
        other => bail!("unknown task {other:?}"),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    let (flags, model_args) = overlay(&cli.command);
    if let (Some(file_task), Some(flag_task)) = (&cfg.task, &flags.task) {
        if file_task != flag_task {
            bail!("configuration is for task {file_task:?}, not {flag_task:?}");
        }
    }
    cfg.merge(&flags);
    if let Some(args) = model_args {
        cfg.model = args.resolve(cfg.model.as_ref())?;
    }
    cfg.merge(&RunConfig {
        seed: cli.seed,
        out: cli.out.clone(),
        format: cli.format,
        ..Default::default()
    });
    let report = dispatch(&cfg)?;
    report.write(cfg.format, cfg.out.as_deref())
}

/// 3 for numerical failures of the core library, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<seqstat::Error>())
        .map_or(2, |e| if e.is_numerical() { 3 } else { 2 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
