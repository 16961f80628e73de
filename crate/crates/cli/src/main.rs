//! `bvtail`: simulate, fit, predict and visualise the prior of the bivariate
//! tail model.

mod commands;
mod config;
mod data;
mod manifest;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "bvtail",
    version,
    about = "Bayesian inference on the joint tail of bivariate data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic sample with Fréchet margins and known dependence.
    Simulate(commands::SimulateArgs),
    /// Run the sampler on a CSV sample and write the trace and estimate of H.
    Fit(RunArgs),
    /// Predictive quantities from a saved fit.
    Predict(commands::PredictArgs),
    /// Prior-only chain and the pointwise band of H(w).
    PriorViz(RunArgs),
}

/// Flags shared by the chain-running subcommands; each overrides the
/// corresponding field of `--config`.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// TOML or JSON config file, or a previous run's manifest.json.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Two header names or 0-based indices, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    columns: Option<Vec<String>>,
    #[arg(long)]
    threshold_quantile: Option<f64>,
    /// Absolute thresholds `u1,u2`.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 2,
        allow_negative_numbers = true
    )]
    thresholds: Option<Vec<f64>>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Mean of the Poisson prior on the number of interior atoms.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Ignore the likelihood and sample the prior.
    #[arg(long)]
    prior_only: bool,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.input {
            c.input = Some(v);
        }
        if let Some(v) = self.columns {
            c.columns = [v[0].clone(), v[1].clone()];
        }
        if let Some(v) = self.threshold_quantile {
            c.threshold_quantile = v;
            c.thresholds = None;
        }
        if let Some(v) = self.thresholds {
            c.thresholds = Some([v[0], v[1]]);
        }
        c.iterations = self.iterations.unwrap_or(c.iterations);
        c.burn_in = self.burn_in.unwrap_or(c.burn_in);
        c.thin = self.thin.unwrap_or(c.thin);
        c.seed = self.seed.unwrap_or(c.seed);
        c.lambda = self.lambda.unwrap_or(c.lambda);
        c.chains = self.chains.unwrap_or(c.chains);
        c.output_dir = self.output_dir.unwrap_or(c.output_dir);
        c.prior_only |= self.prior_only;
        c.validate()?;
        Ok(c)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Fit(args) => commands::fit(args.resolve()?),
        Command::Predict(args) => commands::predict(args),
        Command::PriorViz(args) => commands::prior_viz(args.resolve()?),
    }
}
