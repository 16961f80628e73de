//! Run configuration: defaults, then a TOML/JSON file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bvtail::mcmc::{ChainConfig, MoveScales, DEFAULT_BURN_IN, DEFAULT_ITERATIONS, DEFAULT_THIN};
use bvtail::prior::{MarginSupport, PriorConfig, DEFAULT_LAMBDA, DEFAULT_QUADRATURE_NODES};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    /// Header names or 0-based indices of the two data columns.
    pub columns: [String; 2],
    pub threshold_quantile: f64,
    /// Absolute thresholds; override `threshold_quantile` when present.
    pub thresholds: Option<[f64; 2]>,
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub lambda: f64,
    pub quadrature_nodes: usize,
    pub chains: usize,
    pub prior_only: bool,
    pub scales: MoveScales,
    pub support: MarginSupport,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            columns: ["0".into(), "1".into()],
            threshold_quantile: 0.9,
            thresholds: None,
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
            seed: 0,
            lambda: DEFAULT_LAMBDA,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            chains: 1,
            prior_only: false,
            scales: MoveScales::default(),
            support: MarginSupport::default(),
            output_dir: PathBuf::from("bvtail-out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_quantile > 0.0 && self.threshold_quantile < 1.0) {
            bail!(
                "threshold quantile {} must lie in (0, 1)",
                self.threshold_quantile
            );
        }
        if self.chains == 0 {
            bail!("at least one chain is required");
        }
        if self.burn_in >= self.iterations {
            bail!(
                "burn-in {} leaves nothing of {} iterations",
                self.burn_in,
                self.iterations
            );
        }
        self.chain_config().validate()?;
        Ok(())
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            prior: PriorConfig {
                lambda: self.lambda,
                quadrature_nodes: self.quadrature_nodes,
                support: self.support,
            },
            scales: self.scales,
            prior_only: self.prior_only,
            initial: None,
        }
    }

    /// Loads a config file, or the `config` section of a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut value: serde_json::Value = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        serde_json::from_value(value).with_context(|| format!("config in {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn toml_and_manifest_sections_load() {
        let mut toml_file = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        writeln!(
            toml_file,
            "iterations = 5000\nburn_in = 1000\nseed = 9\ncolumns = [\"a\", \"b\"]"
        )
        .unwrap();
        let cfg = RunConfig::load(toml_file.path()).unwrap();
        assert_eq!((cfg.iterations, cfg.burn_in, cfg.seed), (5000, 1000, 9));
        assert_eq!(cfg.thin, DEFAULT_THIN);
        assert_eq!(cfg.columns, ["a".to_string(), "b".to_string()]);

        let manifest = serde_json::json!({ "command": "fit", "config": cfg });
        let mut json_file = tempfile::Builder::new().suffix(".json").tempfile().unwrap();
        write!(json_file, "{manifest}").unwrap();
        assert_eq!(RunConfig::load(json_file.path()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_settings() {
        let bad_quantile = RunConfig {
            threshold_quantile: 1.0,
            ..RunConfig::default()
        };
        assert!(bad_quantile.validate().is_err());
        let no_chains = RunConfig {
            chains: 0,
            ..RunConfig::default()
        };
        assert!(no_chains.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }
}
