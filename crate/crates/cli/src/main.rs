//! `khessian <command> [--config FILE] [--set key=value ...] [--out DIR]`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod config;
mod run;

use config::{Command, RunConfig};

/// Radial biharmonic k-Hessian problems: phase portraits, shooting,
/// continuation, Green's-function bounds and the verification battery.
#[derive(Debug, Parser)]
#[command(name = "khessian", version)]
struct Cli {
    command: Command,
    /// TOML configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key, e.g. `N=5` or `numeric.T=30`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Parent directory of the run directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("KHESSIAN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("KHESSIAN_THREADS = {raw:?} is not a positive integer"))?;
    if n == 0 {
        return Err("KHESSIAN_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let config = match RunConfig::assemble(Some(cli.command), cli.config.as_deref(), &cli.set) {
        Ok(mut c) => {
            if let Some(out) = cli.out {
                c.output.directory = out;
            }
            c
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run::run(&config) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            if let Some(dir) = &report.directory {
                println!("run directory: {}", dir.display());
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
