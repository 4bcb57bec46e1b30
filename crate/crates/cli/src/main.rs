use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fujita_cli::commands::{cmd_classify, cmd_kaplan, cmd_simulate, cmd_threshold};
use fujita_cli::config::{load, load_experiment, load_sweep, ConfigError, KernelOnlyConfig};
use fujita_cli::sweep::cmd_sweep;
use fujita_cli::verify::{cmd_verify, Fault};

#[derive(Parser)]
#[command(name = "fujita", version, about = "Nonlocal blow-up/extinction experiments")]
struct Cli {
    /// Experiment or sweep configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for records, tables and snapshots.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for sweeps and suites (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for Monte Carlo checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the small-frequency expansion of the kernel and predict p_F.
    ClassifyKernel,
    /// Run one simulation.
    Simulate,
    /// Run a (kernel, p) phase-diagram sweep; resumes from completed cells.
    Sweep {
        /// Also write phase.svg.
        #[arg(long)]
        svg: bool,
    },
    /// Run the invariant suite.
    Verify {
        /// Deliberately corrupt an input to check that the suite notices.
        #[arg(long)]
        inject_fault: Option<Fault>,
    },
    /// Kaplan functional, its dual form and both bounds.
    Kaplan,
    /// Blow-up threshold table for indicator data.
    Threshold,
}

fn config_path(cli: &Cli) -> Result<&Path> {
    cli.config
        .as_deref()
        .ok_or_else(|| ConfigError::Invalid("this command needs --config <file>".into()).into())
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let base = cli.config.as_deref().and_then(Path::parent);
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::ClassifyKernel => {
            let cfg: KernelOnlyConfig = load(config_path(cli)?)?;
            cmd_classify(&cfg, base, out).map(|_| ())
        }
        Command::Simulate => cmd_simulate(&load_experiment(config_path(cli)?)?, base, out).map(|_| ()),
        Command::Sweep { svg } => {
            let plan = load_sweep(config_path(cli)?)?;
            let out = if cli.out_dir == Path::new("out") {
                plan.out_dir.clone().unwrap_or_else(|| cli.out_dir.clone())
            } else {
                cli.out_dir.clone()
            };
            cmd_sweep(&plan, base, &out, cli.jobs, *svg).map(|_| ())
        }
        Command::Verify { inject_fault } => cmd_verify(*inject_fault, cli.seed, out).map(|_| ()),
        Command::Kaplan => cmd_kaplan(&load_experiment(config_path(cli)?)?, base, out).map(|_| ()),
        Command::Threshold => {
            let cfg: KernelOnlyConfig = load(config_path(cli)?)?;
            cmd_threshold(&cfg, base, out).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(fujita_cli::exit_code(&e))
        }
    }
}
