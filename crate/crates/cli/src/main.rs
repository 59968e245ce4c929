use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qoco::harness::{compare, export_qtable, format_comparison, run_experiment, ExperimentConfig, Method};
use qoco::metrics::read_reports;
use qoco::workload::save_trace;

#[derive(Parser)]
#[command(name = "qoco", version, about = "Cache overload control experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override; repeat for several seeds.
    #[arg(long)]
    seed: Vec<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured (method, seed) pair and write reports.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory (overrides `run.output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Method override; repeat for several methods.
        #[arg(long)]
        method: Vec<String>,
        /// Warm-start L-QoCo from a saved Q-table.
        #[arg(long)]
        warm_start: Option<PathBuf>,
    },
    /// Compare report files and print the comparison table.
    Compare {
        /// Report files written by `run`.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the configured workload trace.
    GenTrace {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train L-QoCo on the configured workload and save its Q-table.
    ExportQtable {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
        /// Write the freshly initialised table without running.
        #[arg(long)]
        untrained: bool,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if !common.seed.is_empty() {
        cfg.run.seeds = common.seed.clone();
    }
    Ok(cfg)
}

fn first_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.run.seeds[0]
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.cmd {
        Command::Run {
            common,
            out,
            method,
            warm_start,
        } => {
            let mut cfg = load(&common)?;
            if !method.is_empty() {
                cfg.run.methods = method
                    .iter()
                    .map(|m| m.parse::<Method>())
                    .collect::<Result<_, _>>()?;
            }
            if let Some(w) = warm_start {
                cfg.run.warm_start = Some(w);
            }
            cfg.validate()?;
            let out = out.unwrap_or_else(|| cfg.run.output_dir.clone());
            let summary = run_experiment(&cfg, &out)?;
            print!("{}", summary.table);
            println!("outputs written to {}", out.display());
        }
        Command::Compare { reports, out } => {
            let mut all = Vec::new();
            for p in &reports {
                all.extend(read_reports(p).with_context(|| format!("reading {}", p.display()))?);
            }
            if all.len() < 2 {
                bail!("compare needs at least two reports, found {}", all.len());
            }
            let table = format_comparison(&compare(&all)?);
            print!("{table}");
            if let Some(o) = out {
                std::fs::write(&o, &table).with_context(|| format!("writing {}", o.display()))?;
            }
        }
        Command::GenTrace { common, out } => {
            let cfg = load(&common)?;
            let trace = cfg.trace(first_seed(&cfg))?;
            save_trace(&trace, &out)?;
            println!("{} requests written to {}", trace.len(), out.display());
        }
        Command::ExportQtable { common, out, untrained } => {
            let cfg = load(&common)?;
            export_qtable(&cfg, first_seed(&cfg), !untrained, &out)?;
            println!("Q-table written to {}", out.display());
        }
    }
    Ok(())
}
