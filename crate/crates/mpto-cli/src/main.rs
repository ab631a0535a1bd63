use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpto_cli::{cmd_gain, cmd_run, cmd_verify, resolve_output_dir, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "mpto", version, about = "Multi-partition topology optimization with static condensation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization and write log, density and summary files.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check analytic gradients against central differences on a small grid.
    Verify {
        config: PathBuf,
        /// Perturb the analytic gradients (the check must then fail).
        #[arg(long)]
        tamper: bool,
    },
    /// Write predicted and measured gain tables.
    Gain {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
    RunConfig::parse(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, output_dir } => load(config).and_then(|cfg| {
            let out = resolve_output_dir(output_dir.as_deref(), &cfg);
            let report = cmd_run(&cfg, &out)?;
            print!("{}", report.summary.to_text());
            println!("artifacts written to {}", report.output_dir.display());
            Ok(true)
        }),
        Command::Verify { config, tamper } => load(config).and_then(|cfg| {
            let report = cmd_verify(&cfg, *tamper)?;
            print!("{}", report.to_text());
            Ok(report.passed())
        }),
        Command::Gain { config, output_dir } => load(config).and_then(|cfg| {
            let out = resolve_output_dir(output_dir.as_deref(), &cfg);
            let (path, rows) = cmd_gain(&cfg, &out)?;
            println!("{} rows written to {}", rows.len(), path.display());
            Ok(true)
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
