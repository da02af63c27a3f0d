use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use bvdamage_cli::config::{load_config, thread_count};
use bvdamage_cli::execute::{execute, RunSummary};
use bvdamage_cli::verify::verify_dir;
use bvdamage_cli::{read_config, run_many, sweep_configs, SweepParam};
use clap::{Parser, Subcommand};

/// Phase-field damage with adaptive arc-length stepping.
#[derive(Parser)]
#[command(name = "bvdamage", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.directory`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a configuration for every combination of swept values, one
    /// subdirectory per run.
    Sweep {
        config: PathBuf,
        /// `name=v1,v2,...`, e.g. `rho=0.1,0.05` or `scheme.alpha=2,4`.
        #[arg(long = "param", required = true)]
        params: Vec<SweepParam>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check the artifacts of a finished run.
    Verify { dir: PathBuf },
}

fn report(s: &RunSummary) {
    println!("{}: {} steps, {} with dt <= 1e-8", s.directory.display(), s.steps, s.zero_increment_steps);
    if let (Some(max), Some(last)) = (s.max_reaction, s.final_reaction) {
        println!("  reaction: max {max:.6e}, final {last:.6e}");
    }
    println!("  cumulative balance residual {:.3e}", s.cumulative_residual);
    if let Some(d) = s.oracle_deviation {
        println!("  brute-force oracle deviation {d:.2e}");
    }
}

fn main_inner(cli: Cli) -> Result<bool> {
    let threads = thread_count()?;
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = load_config(&config)?;
            if out.is_some() {
                cfg.output.directory = out;
            }
            let s = execute(&cfg, threads)?;
            report(&s);
            Ok(s.oracle_deviation.is_none_or(|d| d <= 2.0 * bvdamage_cli::execute::ORACLE_GRID))
        }
        Command::Sweep { config, params, out } => {
            let mut base = read_config(&config)?;
            if out.is_some() {
                base.output.directory = out;
            }
            let configs = sweep_configs(&base, &params)?;
            let mut ok = true;
            for (cfg, r) in configs.iter().zip(run_many(&configs, threads)) {
                match r {
                    Ok(s) => report(&s),
                    Err(e) => {
                        ok = false;
                        eprintln!("{}: {e:#}", cfg.output_dir().display());
                    }
                }
            }
            Ok(ok)
        }
        Command::Verify { dir } => {
            let checks = verify_dir(&dir)?;
            for c in &checks {
                println!("{:<16} {:<4} {}", c.name, if c.passed { "ok" } else { "FAIL" }, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
