use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use selcert_cli::config::CONFIG_ENV;
use selcert_cli::{commands, CliResult, RunConfig};

#[derive(Parser)]
#[command(
    name = "selcert",
    version,
    about = "Certified robustness of random-selection ensembles against data poisoning"
)]
struct Cli {
    /// TOML key-value configuration; flags override its keys.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic Gaussian-blob dataset as CSV.
    Generate(RunConfig),
    /// Train an ensemble and write its votes on the test set.
    Train(RunConfig),
    /// Certify every record of a votes file.
    Certify(RunConfig),
    /// Certified accuracy over an intensity grid.
    Curve(RunConfig),
    /// Largest certifiable intensity for a given margin.
    Radius(RunConfig),
    /// Check the closed forms against exact enumeration.
    OracleCheck(RunConfig),
    /// Compare 2-phase and flat training when whole classes are clean.
    CompareCase3(RunConfig),
}

type Handler = fn(&RunConfig, &mut dyn Write) -> CliResult<()>;

fn run(cli: Cli) -> CliResult<()> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let (run, flags): (Handler, RunConfig) = match cli.command {
        Command::Generate(f) => (commands::generate, f),
        Command::Train(f) => (commands::train, f),
        Command::Certify(f) => (commands::certify, f),
        Command::Curve(f) => (commands::curve, f),
        Command::Radius(f) => (commands::radius, f),
        Command::OracleCheck(f) => (commands::oracle_check, f),
        Command::CompareCase3(f) => (commands::compare_case3, f),
    };
    let cfg = base.overlay(&flags);
    let stdout = std::io::stdout();
    run(&cfg, &mut stdout.lock())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("selcert: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
