// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod failure;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "edgeuq", version, about = "Calibrated prediction intervals and drift adaptation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `data.path`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit f, split residuals, calibrate and report on the test split.
    Calibrate(Common),
    /// Evaluate a calibrated model directory on a CSV.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Calibrated model directory; defaults to `output.dir`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Write stream samples from the configured drift scenario.
    Simulate(Common),
    /// Run the adaptation loop on the configured scenario.
    Loop(Common),
    /// Rerun a persisted loop run and verify it byte for byte.
    Replay {
        #[arg(long)]
        run: PathBuf,
    },
}

/// Executes a command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Command::Calibrate(c) => {
            let cfg = RunConfig::load(&c.config)?;
            let data = cfg.data_path(c.data.as_deref())?;
            let out = cfg.output_dir(c.out.as_deref())?;
            let res = commands::cmd_calibrate(&cfg, &data, &out)?;
            Ok(format!("{}wrote {}\n", res.report.to_table(), res.dir.display()))
        }
        Command::Eval { common: c, model } => {
            let cfg = RunConfig::load(&c.config)?;
            let data = cfg.data_path(c.data.as_deref())?;
            let model_dir = match model {
                Some(m) => m,
                None => cfg.output_dir(None)?,
            };
            let out = c.out.unwrap_or_else(|| model_dir.join("eval"));
            let report = commands::cmd_eval(&cfg, &model_dir, &data, &out)?;
            Ok(report.to_table())
        }
        Command::Simulate(c) => {
            let cfg = RunConfig::load(&c.config)?;
            let out = cfg.output_dir(c.out.as_deref())?;
            let path = commands::cmd_simulate(&cfg, &out)?;
            Ok(format!("wrote {}\n", path.display()))
        }
        Command::Loop(c) => {
            let cfg = RunConfig::load(&c.config)?;
            let out = cfg.output_dir(c.out.as_deref())?;
            let summary = commands::cmd_loop(&cfg, &out)?;
            Ok(format!("{}wrote {}\n", summary.to_table(), out.display()))
        }
        Command::Replay { run } => {
            let summary = commands::cmd_replay(&run)?;
            Ok(format!("{}replay ok\n", summary.to_table()))
        }
    }
}
