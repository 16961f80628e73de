//! Recorded chain output and its summaries.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{invalid, Error, Result};
use crate::spectral::{SpectralDistribution, SpectralMeasure, SpectralParams};
use crate::tail::MarginParams;

use super::ChainConfig;

/// One thinned snapshot of the chain, as written to the NDJSON trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: u64,
    pub m: usize,
    pub h0: f64,
    pub h1: f64,
    pub ys: Vec<f64>,
    pub xi1: f64,
    pub zeta1: f64,
    pub sigma1: f64,
    pub xi2: f64,
    pub zeta2: f64,
    pub sigma2: f64,
    pub loglik: f64,
}

impl TraceRecord {
    pub fn new(
        iter: u64,
        theta: &SpectralParams,
        margins: &(MarginParams, MarginParams),
        loglik: f64,
    ) -> Self {
        let (a, b) = margins;
        Self {
            iter,
            m: theta.m(),
            h0: theta.h0(),
            h1: theta.h1(),
            ys: theta.ys().to_vec(),
            xi1: a.xi,
            zeta1: a.zeta,
            sigma1: a.sigma,
            xi2: b.xi,
            zeta2: b.zeta,
            sigma2: b.sigma,
            loglik,
        }
    }

    pub fn theta(&self) -> Result<SpectralParams> {
        SpectralParams::new(self.h0, self.h1, self.ys.clone())
    }

    pub fn measure(&self) -> Result<SpectralMeasure> {
        SpectralMeasure::build(&self.theta()?)
    }

    pub fn margins(&self, u1: f64, u2: f64) -> Result<(MarginParams, MarginParams)> {
        Ok((
            MarginParams::new(self.xi1, self.zeta1, self.sigma1, u1)?,
            MarginParams::new(self.xi2, self.zeta2, self.sigma2, u2)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub(crate) fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub within: MoveStats,
    pub birth: MoveStats,
    pub death: MoveStats,
    pub margins: MoveStats,
}

/// Output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub config: ChainConfig,
    pub thresholds: (f64, f64),
    pub records: Vec<TraceRecord>,
    pub acceptance: AcceptanceStats,
    /// Number of recorded snapshots per model index.
    pub occupancy: BTreeMap<usize, u64>,
    /// Accepted births out of each model index after burn-in.
    pub births_from: BTreeMap<usize, u64>,
    /// Accepted deaths out of each model index after burn-in.
    pub deaths_from: BTreeMap<usize, u64>,
}

impl Trace {
    pub fn new(config: ChainConfig, thresholds: (f64, f64)) -> Self {
        Self {
            config,
            thresholds,
            records: Vec::new(),
            acceptance: AcceptanceStats::default(),
            occupancy: BTreeMap::new(),
            births_from: BTreeMap::new(),
            deaths_from: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: TraceRecord) {
        *self.occupancy.entry(record.m).or_default() += 1;
        self.records.push(record);
    }

    pub fn write_ndjson<W: Write>(&self, out: W) -> Result<()> {
        write_ndjson(&self.records, out)
    }

    pub fn bayes_estimate(&self, grid: &[f64]) -> Result<BayesEstimate> {
        bayes_estimate(&self.records, grid)
    }
}

pub fn write_ndjson<W: Write>(records: &[TraceRecord], mut out: W) -> Result<()> {
    for r in records {
        let line =
            serde_json::to_string(r).map_err(|e| Error::Invariant(format!("trace record: {e}")))?;
        writeln!(out, "{line}").map_err(|e| Error::InvalidInput(format!("writing trace: {e}")))?;
    }
    Ok(())
}

pub fn read_ndjson<R: BufRead>(input: R) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidInput(format!("reading trace: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidInput(format!("trace line {}: {e}", n + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Posterior mean and 95% credible band of one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut data = Data::new(values.to_vec());
        Ok(Self {
            mean,
            lower: data.quantile(0.025),
            upper: data.quantile(0.975),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub xi: Summary,
    pub zeta: Summary,
    pub sigma: Summary,
}

/// Pointwise posterior mean of `H(w)` with a 95% band, and margin summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesEstimate {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub margins: (MarginSummary, MarginSummary),
    pub draws: usize,
}

pub fn bayes_estimate(records: &[TraceRecord], grid: &[f64]) -> Result<BayesEstimate> {
    if records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if grid.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return invalid("grid points must lie in [0, 1]");
    }
    let mut columns = vec![Vec::with_capacity(records.len()); grid.len()];
    for r in records {
        let h = r.measure()?;
        for (col, &w) in columns.iter_mut().zip(grid) {
            col.push(h.cdf(w));
        }
    }
    let mut mean = Vec::with_capacity(grid.len());
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    for col in &columns {
        let s = Summary::of(col)?;
        mean.push(s.mean);
        lower.push(s.lower);
        upper.push(s.upper);
    }
    let margin = |f: fn(&TraceRecord) -> (f64, f64, f64)| -> Result<MarginSummary> {
        let vals: Vec<_> = records.iter().map(f).collect();
        Ok(MarginSummary {
            xi: Summary::of(&vals.iter().map(|v| v.0).collect::<Vec<_>>())?,
            zeta: Summary::of(&vals.iter().map(|v| v.1).collect::<Vec<_>>())?,
            sigma: Summary::of(&vals.iter().map(|v| v.2).collect::<Vec<_>>())?,
        })
    };
    Ok(BayesEstimate {
        grid: grid.to_vec(),
        mean,
        lower,
        upper,
        margins: (
            margin(|r| (r.xi1, r.zeta1, r.sigma1))?,
            margin(|r| (r.xi2, r.zeta2, r.sigma2))?,
        ),
        draws: records.len(),
    })
}

/// Split potential scale reduction factor over chains of equal length.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if chains.is_empty() || n < 2 {
        return invalid("split R-hat needs chains of at least four draws");
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..n], &c[n..2 * n]])
        .collect();
    let nf = n as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / nf).collect();
    let vars: Vec<f64> = halves
        .iter()
        .zip(&means)
        .map(|(h, m)| h.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nf - 1.0))
        .collect();
    let k = halves.len() as f64;
    let grand = means.iter().sum::<f64>() / k;
    let between = nf * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k - 1.0);
    let within = vars.iter().sum::<f64>() / k;
    if within == 0.0 {
        return Ok(if between == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let pooled = (nf - 1.0) / nf * within + between / nf;
    Ok((pooled / within).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(theta: &SpectralParams) -> TraceRecord {
        let m = MarginParams::new(0.1, 0.1, 1.0, 0.0).unwrap();
        TraceRecord::new(7, theta, &(m, m), -12.5)
    }

    #[test]
    fn ndjson_round_trip() {
        let theta = SpectralParams::new(0.1, 0.1, vec![0.2, 0.8]).unwrap();
        let recs = vec![record(&theta), record(&theta)];
        let mut buf = Vec::new();
        write_ndjson(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"zeta2\""));
        assert_eq!(read_ndjson(&buf[..]).unwrap(), recs);
        assert!(read_ndjson(&b"{not json}\n"[..]).is_err());
    }

    #[test]
    fn identical_states_give_zero_width_band() {
        let theta = SpectralParams::new(0.15, 0.05, vec![0.3125, 0.5625, 0.8125]).unwrap();
        let recs = vec![record(&theta); 5];
        let grid = [0.0, 0.25, 0.5, 0.99];
        let est = bayes_estimate(&recs, &grid).unwrap();
        let h = SpectralMeasure::build(&theta).unwrap();
        for (i, &w) in grid.iter().enumerate() {
            assert!((est.mean[i] - h.cdf(w)).abs() < 1e-15);
            assert!((est.upper[i] - est.lower[i]).abs() < 1e-15);
        }
        assert_eq!(est.margins.0.xi.mean, 0.1);
        assert_eq!(bayes_estimate(&[], &grid).unwrap_err(), Error::EmptyTrace);
    }

    #[test]
    fn rhat_behaviour() {
        let a: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64).collect();
        let b: Vec<f64> = (0..200).map(|i| ((i * 53) % 101) as f64).collect();
        let r = split_rhat(&[a.clone(), b]).unwrap();
        assert!(r < 1.05, "{r}");
        let shifted: Vec<f64> = a.iter().map(|x| x + 500.0).collect();
        assert!(split_rhat(&[a, shifted]).unwrap() > 2.0);
        assert!(split_rhat(&[vec![1.0, 2.0]]).is_err());
    }
}
