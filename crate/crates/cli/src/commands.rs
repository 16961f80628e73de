//! Subcommand implementations. Each writes its artifacts and a manifest into
//! its output directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bvtail::mcmc::{read_ndjson, run_chains, split_rhat, BayesEstimate, Trace, TraceRecord};
use bvtail::predictive::{
    conditional_exceedance_quantile, conditional_quantile_curve, joint_predictive,
    rare_event_probability, Posterior,
};
use bvtail::spectral::unit_grid;
use bvtail::synthetic::{sample_fr, FrConfig};
use bvtail::tail::CensoredSample;
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::data::{censor, ingest, quantile_thresholds};
use crate::manifest::{Manifest, FILE_NAME};

/// Points of the `[0, 1]` grid on which `H` is reported.
const H_GRID_INTERVALS: usize = 100;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn csv_writer(dir: &Path, name: &str, manifest: &mut Manifest) -> Result<csv::Writer<File>> {
    manifest.outputs.push(name.to_string());
    let path = dir.join(name);
    csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))
}

fn write_trace(
    dir: &Path,
    name: &str,
    records: &[TraceRecord],
    manifest: &mut Manifest,
) -> Result<()> {
    manifest.outputs.push(name.to_string());
    let path = dir.join(name);
    let mut out = BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    bvtail::mcmc::write_ndjson(records, &mut out)?;
    out.flush()?;
    Ok(())
}

fn write_band(dir: &Path, name: &str, est: &BayesEstimate, manifest: &mut Manifest) -> Result<()> {
    let mut w = csv_writer(dir, name, manifest)?;
    w.write_record(["w", "mean", "lower", "upper"])?;
    for i in 0..est.grid.len() {
        w.serialize((est.grid[i], est.mean[i], est.lower[i], est.upper[i]))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct SimulateArgs {
    /// Dependence parameter in [0, 1]; 0 is independence.
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "bvtail-simulate")]
    pub output_dir: PathBuf,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let mut manifest = Manifest::new("simulate", &args, args.seed)?;
    let config = FrConfig {
        r: args.r,
        n: args.n,
        seed: args.seed,
    };
    let pairs = manifest.time("sample", || Ok(sample_fr(&config)?))?;
    create_dir(&args.output_dir)?;
    let mut w = csv_writer(&args.output_dir, "data.csv", &mut manifest)?;
    w.write_record(["x1", "x2"])?;
    for p in &pairs {
        w.serialize(p)?;
    }
    w.flush()?;
    manifest.summary = json!({ "rows": pairs.len() });
    manifest.write(&args.output_dir)?;
    println!(
        "wrote {} pairs to {}",
        pairs.len(),
        args.output_dir.join("data.csv").display()
    );
    Ok(())
}

type Statistic = (&'static str, fn(&TraceRecord) -> f64);

/// Split R-hat of scalar summaries across chains.
fn rhat_summary(traces: &[Trace]) -> Result<BTreeMap<String, f64>> {
    let stats: [Statistic; 6] = [
        ("m", |r| r.m as f64),
        ("h0", |r| r.h0),
        ("h1", |r| r.h1),
        ("xi1", |r| r.xi1),
        ("xi2", |r| r.xi2),
        ("loglik", |r| r.loglik),
    ];
    stats
        .iter()
        .map(|(name, f)| {
            let chains: Vec<Vec<f64>> = traces
                .iter()
                .map(|t| t.records.iter().map(f).collect())
                .collect();
            Ok((name.to_string(), split_rhat(&chains)?))
        })
        .collect()
}

/// Runs the chains and writes traces, the estimate of `H` and the manifest.
fn run_and_report(
    config: &RunConfig,
    data: &CensoredSample,
    mut manifest: Manifest,
    band_name: &str,
    mut summary: serde_json::Map<String, serde_json::Value>,
) -> Result<()> {
    let dir = &config.output_dir;
    create_dir(dir)?;
    let traces = manifest.time("sampling", || {
        Ok(run_chains(data, &config.chain_config(), config.chains)?)
    })?;
    let merged: Vec<TraceRecord> = traces.iter().flat_map(|t| t.records.clone()).collect();
    let estimate = manifest.time("estimate", || {
        Ok(bvtail::mcmc::bayes_estimate(
            &merged,
            &unit_grid(H_GRID_INTERVALS),
        )?)
    })?;

    write_trace(dir, "trace.ndjson", &merged, &mut manifest)?;
    if traces.len() > 1 {
        for (i, t) in traces.iter().enumerate() {
            write_trace(
                dir,
                &format!("trace-{}.ndjson", i + 1),
                &t.records,
                &mut manifest,
            )?;
        }
        summary.insert(
            "split_rhat".into(),
            serde_json::to_value(rhat_summary(&traces)?)?,
        );
    }
    write_band(dir, band_name, &estimate, &mut manifest)?;
    manifest.outputs.push("estimate.json".into());
    std::fs::write(
        dir.join("estimate.json"),
        serde_json::to_string_pretty(&estimate)?,
    )?;

    let mut occupancy: BTreeMap<usize, u64> = BTreeMap::new();
    for t in &traces {
        for (m, c) in &t.occupancy {
            *occupancy.entry(*m).or_default() += c;
        }
    }
    summary.insert("draws".into(), json!(merged.len()));
    summary.insert("occupancy".into(), serde_json::to_value(occupancy)?);
    summary.insert(
        "acceptance".into(),
        serde_json::to_value(traces.iter().map(|t| t.acceptance).collect::<Vec<_>>())?,
    );
    manifest.summary = serde_json::Value::Object(summary);
    manifest.write(dir)?;
    println!(
        "{} draws from {} chain(s) written to {}",
        merged.len(),
        traces.len(),
        dir.display()
    );
    Ok(())
}

pub fn fit(config: RunConfig) -> Result<()> {
    let Some(input) = &config.input else {
        bail!("fit needs --input or an input in the config file");
    };
    let mut manifest = Manifest::new("fit", &config, config.seed)?;
    let ingested = manifest.time("ingest", || ingest(input, &config.columns))?;
    if ingested.dropped > 0 {
        eprintln!(
            "dropped {} rows with missing or non-numeric values",
            ingested.dropped
        );
    }
    let (u1, u2) = match config.thresholds {
        Some([u1, u2]) => (u1, u2),
        None => quantile_thresholds(&ingested.pairs, config.threshold_quantile)?,
    };
    let (sample, counts) = censor(&ingested.pairs, u1, u2)?;
    println!(
        "thresholds ({u1}, {u2}); quadrant counts 00={} 10={} 01={} 11={}",
        counts.q00, counts.q10, counts.q01, counts.q11
    );
    let mut summary = serde_json::Map::new();
    summary.insert("rows".into(), json!(ingested.pairs.len()));
    summary.insert("dropped_rows".into(), json!(ingested.dropped));
    summary.insert("thresholds".into(), json!([u1, u2]));
    summary.insert("quadrant_counts".into(), serde_json::to_value(counts)?);
    run_and_report(&config, &sample, manifest, "estimate.csv", summary)
}

pub fn prior_viz(mut config: RunConfig) -> Result<()> {
    config.prior_only = true;
    let manifest = Manifest::new("prior-viz", &config, config.seed)?;
    let empty = CensoredSample::new(&[], 0.0, 0.0);
    run_and_report(
        &config,
        &empty,
        manifest,
        "prior_band.csv",
        serde_json::Map::new(),
    )
}

#[derive(Debug, Clone, Serialize, Deserialize, Args)]
pub struct PredictArgs {
    /// Output directory of a previous `fit`.
    #[arg(long)]
    pub fit_dir: PathBuf,
    /// Conditioning values of X1, comma separated; defaults to the threshold
    /// plus 0, 0.5, 1, 2, 4 and 8 mean posterior scales.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x1: Option<Vec<f64>>,
    /// Exceedance probability of the conditional quantile.
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    /// Posterior draws used, evenly spaced through the trace.
    #[arg(long, default_value_t = 500)]
    pub max_draws: usize,
    /// Points per axis of the joint density grid.
    #[arg(long, default_value_t = 25)]
    pub grid_points: usize,
    /// Joint exceedance events `v1,v2`; repeatable.
    #[arg(long = "event", value_parser = parse_pair, allow_negative_numbers = true)]
    pub events: Vec<(f64, f64)>,
    #[arg(long, default_value = "bvtail-predict")]
    pub output_dir: PathBuf,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok((
            a.trim().parse().map_err(|e| format!("{a}: {e}"))?,
            b.trim().parse().map_err(|e| format!("{b}: {e}"))?,
        )),
        _ => Err(format!("expected v1,v2 but got {s:?}")),
    }
}

fn subsample(records: Vec<TraceRecord>, max: usize) -> Vec<TraceRecord> {
    let n = records.len();
    if n <= max {
        return records;
    }
    (0..max).map(|i| records[i * n / max].clone()).collect()
}

pub fn predict(args: PredictArgs) -> Result<()> {
    if args.max_draws == 0 || args.grid_points < 2 {
        bail!("--max-draws must be positive and --grid-points at least 2");
    }
    let mut manifest = Manifest::new("predict", &args, 0)?;
    let fit_manifest = Manifest::read(&args.fit_dir.join(FILE_NAME))?;
    manifest.seed = fit_manifest.seed;
    let thresholds: [f64; 2] = serde_json::from_value(fit_manifest.summary["thresholds"].clone())
        .context("fit manifest has no thresholds")?;
    let [u1, u2] = thresholds;
    let trace_path = args.fit_dir.join("trace.ndjson");
    let records = read_ndjson(BufReader::new(
        File::open(&trace_path).with_context(|| format!("opening {}", trace_path.display()))?,
    ))?;
    let records = subsample(records, args.max_draws);
    let posterior = Posterior::from_records(&records, u1, u2)?;
    let mean_scale = |j: usize| {
        let d = posterior.draws();
        d.iter()
            .map(|d| {
                if j == 0 {
                    d.margins.0.sigma
                } else {
                    d.margins.1.sigma
                }
            })
            .sum::<f64>()
            / d.len() as f64
    };
    let (s1, s2) = (mean_scale(0), mean_scale(1));
    let x1s = args.x1.clone().unwrap_or_else(|| {
        [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|k| u1 + k * s1)
            .collect()
    });
    let dir = &args.output_dir;
    create_dir(dir)?;

    let curve = manifest.time("conditional_quantiles", || {
        Ok(conditional_quantile_curve(&posterior, &x1s, args.p)?)
    })?;
    let mut w = csv_writer(dir, "conditional_quantiles.csv", &mut manifest)?;
    w.write_record(["x1", "quantile", "lower_band", "upper_band"])?;
    for q in &curve {
        w.serialize((q.x1, q.quantile, q.lower_band, q.upper_band))?;
    }
    w.flush()?;

    let exceedance = manifest.time("exceedance_quantiles", || {
        x1s.iter()
            .map(|&x1| Ok((x1, conditional_exceedance_quantile(&posterior, x1, args.p)?)))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut w = csv_writer(dir, "conditional_exceedance_quantiles.csv", &mut manifest)?;
    w.write_record(["x1", "quantile"])?;
    for row in &exceedance {
        w.serialize(row)?;
    }
    w.flush()?;

    let span = |u: f64, s: f64| -> Vec<f64> {
        (0..args.grid_points)
            .map(|k| u + 8.0 * s * k as f64 / (args.grid_points - 1) as f64)
            .collect()
    };
    let grid = manifest.time("joint_density", || {
        Ok(joint_predictive(&posterior, &span(u1, s1), &span(u2, s2))?)
    })?;
    let mut w = csv_writer(dir, "joint_density.csv", &mut manifest)?;
    w.write_record(["x1", "x2", "density"])?;
    for row in grid.rows() {
        w.serialize(row)?;
    }
    w.flush()?;

    let events = args
        .events
        .iter()
        .map(|&(v1, v2)| Ok(json!({ "v1": v1, "v2": v2, "probability": rare_event_probability(&posterior, v1, v2)? })))
        .collect::<Result<Vec<_>>>()?;
    manifest.summary = json!({
        "draws": posterior.len(),
        "thresholds": [u1, u2],
        "corner_mass": grid.corner_mass,
        "p": args.p,
        "rare_events": events,
    });
    manifest.write(dir)?;
    for q in &curve {
        println!(
            "x1 = {:.4}: quantile {:.4} (95% band {:.4} to {:.4})",
            q.x1, q.quantile, q.lower_band, q.upper_band
        );
    }
    Ok(())
}
