//! Command-line front end for the `capnet` library.

pub mod args;
pub mod commands;
pub mod error;
pub mod render;
pub mod suites;
pub mod sweep;

use std::path::Path;

use args::{Cli, Command, Format, VerifyArgs};
use error::{CliError, CliResult};
use render::{csv, json, table};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CAPNET_THREADS";

/// Rendered text plus an optional verification failure.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub failure: Option<String>,
}

impl Output {
    pub fn ok(text: String) -> Self {
        Self { text, failure: None }
    }
}

/// Size the global pool from `CAPNET_THREADS`. Results never depend on it.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the worker pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn verify(a: &VerifyArgs) -> CliResult<Output> {
    let outcomes = suites::run_suite(a.suite, a.seed)?;
    let headers = ["suite", "cases", "failures", "status", "notes"];
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            vec![
                o.name.clone(),
                o.cases.to_string(),
                o.failures.to_string(),
                if o.passed() { "PASS" } else { "FAIL" }.into(),
                o.notes.join(" | "),
            ]
        })
        .collect();
    let text = match a.format {
        Format::Table => table(&[format!("capnet verify seed={}", a.seed)], &headers, &rows),
        Format::Csv => csv(&headers, &rows)?,
        Format::Json => json(&outcomes),
    };
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.passed())
        .map(|o| o.name.as_str())
        .collect();
    let failure = (!failed.is_empty()).then(|| format!("failing suites: {}", failed.join(", ")));
    Ok(Output { text, failure })
}

/// Run one subcommand; output goes to `--out` when the command takes it as a
/// report destination, else to the returned text.
pub fn run(cli: &Cli) -> CliResult<Output> {
    let (output, dest) = match &cli.command {
        Command::Report(a) => (commands::report(a)?, a.out.as_deref()),
        Command::Compress(a) => (commands::compress(a)?, None),
        Command::Rademacher(a) => (commands::rademacher(a)?, a.out.as_deref()),
        Command::Lowerbound(a) => (commands::lowerbound(a)?, a.out.as_deref()),
        Command::Sweep(a) => (sweep::run(a)?, a.out.as_deref()),
        Command::Verify(a) => (verify(a)?, a.out.as_deref()),
    };
    match dest {
        Some(path) => {
            write(path, &output.text)?;
            Ok(Output {
                text: String::new(),
                failure: output.failure,
            })
        }
        None => Ok(output),
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
}
