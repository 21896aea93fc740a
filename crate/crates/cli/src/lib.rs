//! Command-line front end: data ingestion, configuration, and reports.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod patterns;
pub mod report;

use config::{AnalysisConfig, Overrides, DEFAULT_AMPLIFY_LAMBDAS};
use error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "matched-did", version, about = "Matched differences-in-differences with sensitivity analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match within each period, then across periods; write pairs,
    /// quadruples and balance reports.
    Match(Overrides),
    /// Randomization test, estimate and confidence interval at gamma = 1.
    Test(Overrides),
    /// Worst-case p-values, changepoint, estimate bounds and amplification.
    Sens(Overrides),
    /// Print (lambda, delta) pairs equivalent to each gamma.
    Amplify {
        #[arg(long = "gamma", required = true)]
        gammas: Vec<f64>,
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo level and power study.
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        quads: Option<usize>,
        /// CSV file to write.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write the eight schematic panels as SVG.
    Patterns {
        #[arg(long, default_value = "patterns")]
        output: PathBuf,
    },
}

fn list(files: &[PathBuf]) -> String {
    files.iter().map(|f| format!("wrote {}\n", f.display())).collect()
}

/// Runs one command and returns the text to print on success.
pub fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Match(o) => {
            let a = commands::cmd_match(&AnalysisConfig::resolve(&o)?)?;
            Ok(a.report.render() + &list(&a.files))
        }
        Command::Test(o) => {
            let a = commands::cmd_test(&AnalysisConfig::resolve(&o)?)?;
            Ok(a.report.render() + &list(&a.files))
        }
        Command::Sens(o) => {
            let a = commands::cmd_sens(&AnalysisConfig::resolve(&o)?)?;
            Ok(a.report.render() + &list(&a.files))
        }
        Command::Amplify { gammas, lambdas, json } => {
            let lambdas = if lambdas.is_empty() { DEFAULT_AMPLIFY_LAMBDAS.to_vec() } else { lambdas };
            let r = commands::cmd_amplify(&gammas, &lambdas)?;
            if json {
                Ok(serde_json::to_string_pretty(&r).expect("reports serialize") + "\n")
            } else {
                Ok(r.tables.iter().map(|t| t.render()).collect())
            }
        }
        Command::Simulate {
            overrides,
            reps,
            quads,
            output,
        } => {
            let mut cfg = AnalysisConfig::resolve(&overrides)?;
            if let Some(r) = reps {
                cfg.simulate.reps = r;
            }
            if let Some(q) = quads {
                cfg.simulate.quads = q;
            }
            if output.is_some() {
                cfg.simulate.output = output;
            }
            let a = commands::cmd_simulate(&cfg)?;
            let s = &a.report;
            Ok(format!(
                "replications: {}\nrejection rate: {} (se {})\n{}",
                s.rows.len(),
                report::sig4(s.rejection_rate),
                report::sig4(s.standard_error),
                list(&a.files)
            ))
        }
        Command::Patterns { output } => Ok(list(&commands::cmd_patterns(&output)?)),
    }
}

/// Parses arguments and runs; clap's own errors keep their exit status.
pub fn main_with<I, T>(args: I) -> std::process::ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return std::process::ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            std::process::ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit()
        }
    }
}
