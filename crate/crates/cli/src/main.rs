//! Batch runner for the orthogonal-state QKD simulator.

mod output;
mod settings;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orthoqkd::analysis::{aggregate, attack_constant_table, noise_rate_table, reference_table};
use orthoqkd::run_trials;

use crate::output::Format;
use crate::settings::{read_config, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "orthoqkd", version, about = "Orthogonal-state QKD simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a batch of independent protocol runs and summarize them.
    Run(Box<RunArgs>),
    /// Wrong-guess error constants of the block purification attack.
    AttackTable(TableArgs),
    /// Qubit and classical-bit cost per key bit, with efficiencies.
    EfficiencyTable(TableArgs),
}

#[derive(Args, Debug)]
struct Sink {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[command(flatten)]
    sink: Sink,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Flat key-value file (TOML, or JSON with a .json extension). Flags
    /// given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1 or 2.
    #[arg(long)]
    protocol: Option<String>,
    /// Key positions; each run prepares 2n coding states.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Master seed. Drawn at random and echoed when absent.
    #[arg(long)]
    seed: Option<String>,
    /// e.g. none, purify-single:computational, purify-block,
    /// substitute:entangled:best, measure-resend:block, two-stage.
    #[arg(long)]
    attack: Option<String>,
    /// e.g. none, cd:0.3, cr, pauli-z:0.9, pauli:0.7,0.1,0.1,0.1, pd:0.2, ad:0.2.
    #[arg(long)]
    noise: Option<String>,
    /// correlated or independent.
    #[arg(long)]
    grouping: Option<String>,
    /// per-run or per-stage.
    #[arg(long)]
    angle_schedule: Option<String>,
    /// Use the codebook matched to the noise mode (true or false).
    #[arg(long)]
    adapt_to_noise: Option<String>,
    #[arg(long)]
    checking_fraction: Option<String>,
    #[arg(long)]
    decoy_ratio: Option<String>,
    /// Highest tolerated error rate before a run aborts.
    #[arg(long)]
    error_threshold: Option<String>,
    #[command(flatten)]
    sink: Sink,
}

impl RunArgs {
    fn resolve(&self) -> Result<(Settings, bool), CliError> {
        let mut settings = Settings::default();
        let mut seeded = false;
        let mut pairs = match &self.config {
            Some(path) => read_config(path)?,
            None => Vec::new(),
        };
        let flags = [
            ("protocol", &self.protocol),
            ("n", &self.n),
            ("trials", &self.trials),
            ("seed", &self.seed),
            ("attack", &self.attack),
            ("noise", &self.noise),
            ("grouping", &self.grouping),
            ("angle_schedule", &self.angle_schedule),
            ("adapt_to_noise", &self.adapt_to_noise),
            ("checking_fraction", &self.checking_fraction),
            ("decoy_ratio", &self.decoy_ratio),
            ("error_threshold", &self.error_threshold),
        ];
        pairs.extend(
            flags
                .iter()
                .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))),
        );
        for (k, v) in &pairs {
            settings.set(k, v)?;
            seeded |= k == "seed";
        }
        if !seeded {
            settings.seed = rand::random();
        }
        settings.validate()?;
        Ok((settings, !seeded))
    }
}

fn emit(sink: &Sink, text: &str) -> Result<(), CliError> {
    match &sink.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn run_batch(args: &RunArgs) -> Result<(), CliError> {
    let (settings, drawn) = args.resolve()?;
    if drawn {
        eprintln!("seed: {}", settings.seed);
    }
    let reports = run_trials(&settings.config(), settings.attack, settings.trials)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let summary = aggregate(&reports).map_err(|e| CliError::Runtime(e.to_string()))?;
    emit(
        &args.sink,
        &output::batch(&settings, &summary, &reports, args.sink.format)?,
    )
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => run_batch(&args),
        Command::AttackTable(t) => emit(
            &t.sink,
            &output::attack_table(&attack_constant_table(), t.sink.format)?,
        ),
        Command::EfficiencyTable(t) => {
            let mut rows = reference_table();
            rows.extend(noise_rate_table());
            emit(&t.sink, &output::rate_table(&rows, t.sink.format)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
