//! Command layer of the `relaxflow` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use clap::{Parser, Subcommand};

pub use commands::{
    cmd_bench, cmd_datagen, cmd_report, cmd_simulate, cmd_train, BenchArgs, DatagenArgs,
    ReportArgs, SimulateArgs, TrainArgs,
};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "relaxflow",
    version,
    about = "Two-phase flow simulator with learned relaxation control"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run perturbed scenarios and write a training dataset.
    Datagen(DatagenArgs),
    /// Fit a forest or boosted surrogate on a dataset.
    Train(TrainArgs),
    /// Run one simulation with one relaxation strategy.
    Simulate(SimulateArgs),
    /// Compare strategies on a test case.
    Bench(BenchArgs),
    /// Render SVG charts from bench or simulate outputs.
    Report(ReportArgs),
}

/// Runs a parsed command, printing its human-readable summary.
pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Datagen(a) => {
            let o = commands::cmd_datagen(&a)?;
            println!(
                "{} rows from {} simulations ({} failed) -> {}, {}",
                o.summary.n_rows,
                o.summary.n_sims,
                o.summary.failed.len(),
                o.train.display(),
                o.test.display()
            );
        }
        Command::Train(a) => {
            let r = commands::cmd_train(&a)?;
            println!(
                "{:?}: {} trees, train RMSE {:.4}, test RMSE {:.4}",
                r.kind, r.n_trees, r.train_rmse, r.test_rmse
            );
            let mut imp = r.importances.clone();
            imp.sort_by(|a, b| b.1.total_cmp(&a.1));
            for (name, v) in imp {
                println!("  {name:<32} {v:.4}");
            }
        }
        Command::Simulate(a) => {
            let r = commands::cmd_simulate(&a)?;
            println!(
                "metric {:.1} (outer {}, inner {}), {} steps, converged: {}, {} updates",
                r.total_metric,
                r.total_outer,
                r.total_inner,
                r.steps.len(),
                r.all_converged,
                r.n_updates
            );
        }
        Command::Bench(a) => {
            let r = commands::cmd_bench(&a)?;
            print!("{}", commands::format_bench_table(&r));
        }
        Command::Report(a) => {
            for p in commands::cmd_report(&a)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

/// Full entry point: config expansion, parsing and execution. Returns the
/// process exit code.
pub fn main_with_args(argv: Vec<String>) -> i32 {
    let argv = match config::expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
