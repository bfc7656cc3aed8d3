//! Experiment harness around the `subspectral` solvers.
//!
//! Subcommands: `run`, `compare`, `tau-sweep`, `curves`, `valstop`. Options
//! come from defaults, an optional INI-style `--config` file, and flags, in
//! increasing priority. Exit codes: 0 on success, 2 when a required run
//! declares line-search failure, 1 on usage or I/O errors.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::Outcome;
use config::{load_config_file, RawOptions};
use subspectral::MethodName;

#[derive(Debug, Parser)]
#[command(
    name = "subspectral",
    about = "Subsampled nonmonotone spectral gradient experiments",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// INI-style config file (`key = value`); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset file path (see --format).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Input format: libsvm, csv, or synthetic.
    #[arg(long)]
    format: Option<String>,
    /// Method name(s), comma separated: SG_N_1, SG_N_2, SG_I_1, SG_I_3, SGFull.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<String>>,
    /// Initial sample size N0.
    #[arg(long)]
    n0: Option<usize>,
    /// Sample growth factor (> 1).
    #[arg(long)]
    tau: Option<f64>,
    /// Gradient-norm stopping tolerance.
    #[arg(long)]
    eps: Option<f64>,
    /// Minimum sample fraction for the validation stop rule.
    #[arg(long)]
    p: Option<f64>,
    /// Repetitions per method.
    #[arg(long)]
    runs: Option<usize>,
    /// Values trimmed from each end in tau-sweep aggregation.
    #[arg(long)]
    trim: Option<usize>,
    /// Base seed; run i uses a seed derived from (seed, i).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV/JSON files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record full-sum values, approximation errors and the curvature check.
    #[arg(long)]
    diagnostics: bool,
    /// Iteration safety cap.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Seed for synthetic data generation and the train/validation split.
    #[arg(long)]
    data_seed: Option<u64>,
    /// Fraction of the data used for training.
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Synthetic data: feature dimension.
    #[arg(long)]
    synth_n: Option<usize>,
    /// Synthetic data: number of points.
    #[arg(long)]
    synth_count: Option<usize>,
    /// Synthetic data: label noise level.
    #[arg(long)]
    synth_noise: Option<f64>,
    /// Synthetic data: feature scale spread (condition).
    #[arg(long)]
    synth_cond: Option<f64>,
}

impl CommonArgs {
    fn raw(&self) -> RawOptions {
        RawOptions {
            dataset: self.dataset.clone(),
            format: self.format.clone(),
            method: self.method.clone(),
            n0: self.n0,
            tau: self.tau,
            eps: self.eps,
            p: self.p,
            runs: self.runs,
            trim: self.trim,
            seed: self.seed,
            out: self.out.clone(),
            // A bare flag can only switch diagnostics on; the config file can
            // set either value.
            diagnostics: self.diagnostics.then_some(true),
            max_iter: self.max_iter,
            data_seed: self.data_seed,
            train_fraction: self.train_fraction,
            synth_n: self.synth_n,
            synth_count: self.synth_count,
            synth_noise: self.synth_noise,
            synth_cond: self.synth_cond,
        }
    }

    fn resolve(&self, defaults: &[MethodName]) -> Result<config::Options> {
        let mut raw = self.raw();
        if let Some(path) = &self.config {
            raw = raw.or(load_config_file(path)?);
        }
        raw.resolve(defaults)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One seeded run; writes trace.csv and summary.json.
    Run(CommonArgs),
    /// R runs per method; writes Table-style means (compare.csv/.json).
    Compare(CommonArgs),
    /// Cost sweep over the growth factor grid (tau_sweep.csv/.json).
    TauSweep(CommonArgs),
    /// Training-error curves against iterations and scalar products.
    Curves(CommonArgs),
    /// Validation-loss stopping experiment.
    Valstop(CommonArgs),
}

/// Parses `argv` and executes; returns the process exit code.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::DeclaredFailure) => 2,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Run(args) => {
            let opts = args.resolve(&[])?;
            commands::cmd_run(&opts)
        }
        Command::Compare(args) => {
            let opts = args.resolve(&MethodName::ALL)?;
            commands::cmd_compare(&opts)
        }
        Command::TauSweep(args) => {
            let opts = args.resolve(&[MethodName::SgN1, MethodName::SgI1])?;
            commands::cmd_tau_sweep(&opts, None)
        }
        Command::Curves(args) => {
            let opts =
                args.resolve(&[MethodName::SgFull, MethodName::SgN1, MethodName::SgI1])?;
            commands::cmd_curves(&opts)
        }
        Command::Valstop(args) => {
            let opts = args.resolve(&[MethodName::SgN1, MethodName::SgI1])?;
            commands::cmd_valstop(&opts)
        }
    }
}
