//! `vic`: reproducible variable importance cloud runs.
//!
//! Exit codes: 0 success, 1 configuration or usage, 2 data, 3 numerical.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Params;
use run::{CliError, Run};

#[derive(Parser)]
#[command(name = "vic", version, about = "Variable importance clouds over Rashomon sets")]
struct Cli {
    /// JSON config; flags override it, it overrides defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a CSV, write it back with its second moments and a summary
    Ingest(Params),
    /// Generate a Gaussian or binary dataset
    Gen(Params),
    /// Ridge minimizer, best loss and reliance at the minimizer
    FitLinear(Params),
    /// Logistic maximum likelihood fit
    FitLogistic(Params),
    /// Exact Rashomon ellipsoid of ridge regression
    RashomonLinear(Params),
    /// Sampled logistic Rashomon set and its reliance cloud
    RashomonLogistic(Params),
    /// Every decision table within the Rashomon threshold
    RashomonTree(Params),
    /// Linear reliance cloud and its ellipsoid approximation
    Vic(Params),
    /// Pairwise reliance diagram from a cloud
    Vid(Params),
    /// Per-feature reliance range from a cloud
    Bounds(Params),
    /// Pick the sampler's enlargement factor and round count
    Tune(Params),
    /// Wald test of a linear model's reliance on one feature
    Test(Params),
    /// vic, then vid and bounds
    Linear(Params),
    /// rashomon-logistic, then vid and bounds
    Logistic(Params),
    /// rashomon-tree, then a clustered vid and bounds
    Tree(Params),
}

type Body = fn(&mut Run) -> Result<(), CliError>;

impl Command {
    fn split(self) -> (&'static str, Params, Body) {
        use Command::*;
        match self {
            Ingest(p) => ("ingest", p, commands::ingest),
            Gen(p) => ("gen", p, commands::gen),
            FitLinear(p) => ("fit-linear", p, commands::fit_linear),
            FitLogistic(p) => ("fit-logistic", p, commands::fit_logistic_cmd),
            RashomonLinear(p) => ("rashomon-linear", p, commands::rashomon_linear),
            RashomonLogistic(p) => ("rashomon-logistic", p, commands::rashomon_logistic),
            RashomonTree(p) => ("rashomon-tree", p, commands::rashomon_tree),
            Vic(p) => ("vic", p, commands::vic),
            Vid(p) => ("vid", p, commands::vid),
            Bounds(p) => ("bounds", p, commands::bounds),
            Tune(p) => ("tune", p, commands::tune),
            Test(p) => ("test", p, commands::test),
            Linear(p) => ("linear", p, commands::linear),
            Logistic(p) => ("logistic", p, commands::logistic),
            Tree(p) => ("tree", p, commands::tree),
        }
    }
}

fn execute(cli: Cli) -> Result<Vec<String>, CliError> {
    let (name, flags, body) = cli.command.split();
    let params = match &cli.config {
        Some(path) => flags.over(Params::from_file(path)?),
        None => flags,
    };
    let mut run = Run::new(name, params)?;
    body(&mut run)?;
    run.finish()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
