//! `m1sim`: batch runs producing CSV tables plus JSON metadata.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use config::RunConfig;
use error::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "m1sim",
    version,
    about = "Kink dynamics and Rydberg dressing runs for the M1 lattice model"
)]
struct Cli {
    /// TOML file of `key = value` parameters; command-line pairs win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (else `out=`, then $M1SIM_OUTPUT_DIR, then ./m1sim-out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Do not list the written files on stdout.
    #[arg(long)]
    quiet: bool,
    #[arg(value_parser = commands::COMMANDS)]
    command: String,
    /// `key=value` parameters.
    params: Vec<String>,
}

fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_overrides(&cli.params)?;
    commands::validate(&cli.command, &cfg)?;
    let precision: usize = cfg.parse("precision", 17)?;
    if !(1..=17).contains(&precision) {
        return Err(CliError::Config(format!(
            "precision={precision}: expected 1..=17"
        )));
    }
    let dir = match &cli.out {
        Some(p) => p.clone(),
        None => output::output_dir(cfg.raw("out")),
    };
    let started = Instant::now();
    let bundle = commands::run(&cli.command, &cfg)?;
    let wall = started.elapsed().as_secs_f64();
    output::write_bundle(&dir, &cli.command, &cfg, &bundle, precision, wall)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.render().to_string().trim().to_string());
            eprintln!("{}", err.record());
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(files) => {
            if !cli.quiet {
                for f in files {
                    println!("{}", f.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
