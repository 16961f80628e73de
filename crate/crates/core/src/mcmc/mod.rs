//! Reversible-jump Metropolis-Hastings sampler over `(m, θ, η1, η2)`.

pub mod moves;
pub mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::prior::{mdi_log_prior, Prior, PriorConfig};
use crate::spectral::{SpectralMeasure, SpectralParams};
use crate::tail::{CensoredSample, MarginParams};

use moves::{
    birth_interval, birth_move, death_move, split_counts, within_interval, within_move, Coord,
};
pub use trace::{
    bayes_estimate, read_ndjson, split_rhat, write_ndjson, AcceptanceStats, BayesEstimate,
    MarginSummary, MoveStats, Summary, Trace, TraceRecord,
};

pub const DEFAULT_ITERATIONS: u64 = 200_000;
pub const DEFAULT_BURN_IN: u64 = 50_000;
pub const DEFAULT_THIN: u64 = 10;
/// Iterations between recomputations of the cached log densities in debug
/// builds.
const CACHE_CHECK_EVERY: u64 = 997;

/// Standard deviations of the margin random walk (on `ξ`, `log ζ`, `log σ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveScales {
    pub xi: f64,
    pub zeta: f64,
    pub sigma: f64,
}

impl Default for MoveScales {
    fn default() -> Self {
        Self {
            xi: 0.01,
            zeta: 0.01,
            sigma: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub theta: SpectralParams,
    /// `(ξ, ζ, σ)` for each margin.
    pub margins: [(f64, f64, f64); 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub prior: PriorConfig,
    pub scales: MoveScales,
    /// Drop the likelihood and sample the prior.
    pub prior_only: bool,
    pub initial: Option<InitialState>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
            seed: 0,
            prior: PriorConfig::default(),
            scales: MoveScales::default(),
            prior_only: false,
            initial: None,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return invalid("thinning interval must be positive");
        }
        let s = self.scales;
        if [s.xi, s.zeta, s.sigma]
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return invalid("margin move scales must be positive");
        }
        Ok(())
    }
}

/// Current point of the chain with its cached log densities.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub theta: SpectralParams,
    pub measure: SpectralMeasure,
    pub margins: (MarginParams, MarginParams),
    pub cached_log_lik: f64,
    pub cached_log_prior: f64,
}

/// Initial state: three equally spaced atoms with `h0 = h1 = 0.1`, `ξ = 0.1`,
/// `ζ` the exceedance fraction and `σ` the standard deviation of the
/// exceedances.
pub fn default_initial_state(data: &CensoredSample) -> InitialState {
    let theta = SpectralParams::new(0.1, 0.1, vec![1.0 / 6.0, 0.5, 5.0 / 6.0])
        .expect("fixed starting point is valid");
    let n = data.len();
    let start = |exceedances: Vec<f64>, u: f64| {
        let count = exceedances.len();
        let zeta = match (n, count) {
            (0, _) => 0.1,
            (_, 0) => 1.0 / (n as f64 + 1.0),
            _ => count as f64 / n as f64,
        };
        let sigma = if count >= 2 {
            let excess: Vec<f64> = exceedances.iter().map(|x| x - u).collect();
            let mean = excess.iter().sum::<f64>() / count as f64;
            let var = excess.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (count as f64 - 1.0);
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        } else {
            1.0
        };
        (0.1, zeta, sigma)
    };
    InitialState {
        theta,
        margins: [
            start(data.exceedances_first().collect(), data.u1),
            start(data.exceedances_second().collect(), data.u2),
        ],
    }
}

pub struct Sampler<'a> {
    data: &'a CensoredSample,
    prior: &'a Prior,
    config: &'a ChainConfig,
    rng: ChaCha8Rng,
    state: ChainState,
    trace: Trace,
}

impl<'a> Sampler<'a> {
    pub fn new(
        data: &'a CensoredSample,
        config: &'a ChainConfig,
        prior: &'a Prior,
    ) -> Result<Self> {
        config.validate()?;
        let init = config
            .initial
            .clone()
            .unwrap_or_else(|| default_initial_state(data));
        let theta =
            SpectralParams::new(init.theta.h0(), init.theta.h1(), init.theta.ys().to_vec())?;
        let [a, b] = init.margins;
        let margins = (
            MarginParams::new(a.0, a.1, a.2, data.u1)?,
            MarginParams::new(b.0, b.1, b.2, data.u2)?,
        );
        let measure = SpectralMeasure::build(&theta)?;
        let mut sampler = Self {
            data,
            prior,
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            state: ChainState {
                theta,
                measure,
                margins,
                cached_log_lik: 0.0,
                cached_log_prior: 0.0,
            },
            trace: Trace::new(config.clone(), (data.u1, data.u2)),
        };
        let (ll, lp) = sampler.recompute()?;
        if !(ll.is_finite() && lp.is_finite()) {
            return Err(Error::NonFiniteStart(if ll.is_finite() { lp } else { ll }));
        }
        sampler.state.cached_log_lik = ll;
        sampler.state.cached_log_prior = lp;
        Ok(sampler)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    fn log_lik(&self, h: &SpectralMeasure, margins: &(MarginParams, MarginParams)) -> Result<f64> {
        if self.config.prior_only {
            return Ok(0.0);
        }
        self.data.log_likelihood(h, &margins.0, &margins.1)
    }

    fn log_prior(
        &self,
        theta: &SpectralParams,
        margins: &(MarginParams, MarginParams),
    ) -> Result<f64> {
        Ok(self.prior.model_log_prior(theta.m())?
            + self.prior.theta_log_prior(theta)?
            + self.prior.margin_log_prior(&margins.0)
            + self.prior.margin_log_prior(&margins.1))
    }

    fn recompute(&self) -> Result<(f64, f64)> {
        let s = &self.state;
        Ok((
            self.log_lik(&s.measure, &s.margins)?,
            self.log_prior(&s.theta, &s.margins)?,
        ))
    }

    fn accept(&mut self, log_alpha: f64) -> bool {
        // log U < log α, with U in (0, 1]
        log_alpha >= 0.0 || (1.0 - self.rng.random::<f64>()).ln() < log_alpha
    }

    /// Metropolis-Hastings step for a spectral proposal; `extra` holds the
    /// proposal and Jacobian terms.
    fn try_theta(&mut self, proposal: SpectralParams, extra: f64) -> Result<bool> {
        let measure = SpectralMeasure::build(&proposal)?;
        let ll = self.log_lik(&measure, &self.state.margins)?;
        let lp = self.log_prior(&proposal, &self.state.margins)?;
        if !(ll.is_finite() && lp.is_finite()) {
            return Ok(false);
        }
        let log_alpha = ll - self.state.cached_log_lik + lp - self.state.cached_log_prior + extra;
        if !self.accept(log_alpha) {
            return Ok(false);
        }
        self.state.theta = proposal;
        self.state.measure = measure;
        self.state.cached_log_lik = ll;
        self.state.cached_log_prior = lp;
        Ok(true)
    }

    fn move_within(&mut self) -> Result<bool> {
        let m = self.state.theta.m();
        let first = self.rng.random_range(0..m + 2);
        let mut second = self.rng.random_range(0..m + 1);
        if second >= first {
            second += 1;
        }
        let (a, b) = (first.min(second), first.max(second));
        let (ca, cb) = (Coord::from_index(a, m), Coord::from_index(b, m));
        let Some(interval) = within_interval(&self.state.theta, ca, cb) else {
            return Ok(false);
        };
        let u = interval.at(self.rng.random::<f64>());
        if !interval.contains(u) {
            return Ok(false);
        }
        let Some((proposal, log_jac)) = within_move(&self.state.theta, ca, cb, u) else {
            return Ok(false);
        };
        self.try_theta(proposal, log_jac)
    }

    fn move_birth(&mut self) -> Result<bool> {
        let theta = &self.state.theta;
        let m = theta.m();
        let k = self.rng.random_range(0..m);
        let ybar = theta.target_mean();
        let Some(interval) = birth_interval(theta.ys()[k], ybar) else {
            return Ok(false);
        };
        let u = interval.at(self.rng.random::<f64>());
        if !interval.contains(u) {
            return Ok(false);
        }
        let Some(proposal) = birth_move(theta, k, u) else {
            return Ok(false);
        };
        let (below, above) = split_counts(&proposal);
        if below == 0 || above == 0 {
            return Ok(false);
        }
        let mf = m as f64;
        let extra = 0.5 * ((mf + 1.0) / mf).ln() + move_probs(m + 1).2.ln()
            - ((below * above) as f64).ln()
            - move_probs(m).1.ln()
            + mf.ln()
            + interval.len().ln();
        self.try_theta(proposal, extra)
    }

    fn move_death(&mut self) -> Result<bool> {
        let theta = &self.state.theta;
        let m = theta.m();
        let (below, above) = split_counts(theta);
        if m < 2 || below == 0 || above == 0 {
            return Ok(false);
        }
        // atoms are sorted, so the first `below` sit at or below ȳ
        let j = self.rng.random_range(0..below);
        let k = below + self.rng.random_range(0..above);
        let Some(death) = death_move(theta, j, k) else {
            return Ok(false);
        };
        let Some(reverse) = birth_interval(death.partner, theta.target_mean()) else {
            return Ok(false);
        };
        let mf = m as f64;
        let extra = 0.5 * ((mf - 1.0) / mf).ln() + move_probs(m - 1).1.ln()
            - (mf - 1.0).ln()
            - reverse.len().ln()
            - move_probs(m).2.ln()
            + ((below * above) as f64).ln();
        self.try_theta(death.theta, extra)
    }

    fn move_margins(&mut self) -> Result<bool> {
        let j = self.rng.random_range(0..2usize);
        let z: [f64; 3] = [
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
            self.rng.sample(StandardNormal),
        ];
        let s = self.config.scales;
        let current = if j == 0 {
            self.state.margins.0
        } else {
            self.state.margins.1
        };
        let proposed = MarginParams {
            xi: current.xi + s.xi * z[0],
            zeta: current.zeta * (s.zeta * z[1]).exp(),
            sigma: current.sigma * (s.sigma * z[2]).exp(),
            u: current.u,
        };
        if !self.prior.config().support.contains(&proposed) || proposed.validate().is_err() {
            return Ok(false);
        }
        let mut margins = self.state.margins;
        if j == 0 {
            margins.0 = proposed;
        } else {
            margins.1 = proposed;
        }
        let ll = self.log_lik(&self.state.measure, &margins)?;
        if !ll.is_finite() {
            return Ok(false);
        }
        let prior_change = mdi_log_prior(&proposed) - mdi_log_prior(&current);
        let proposal_ratio = (proposed.zeta * proposed.sigma / (current.zeta * current.sigma)).ln();
        let log_alpha = ll - self.state.cached_log_lik + prior_change + proposal_ratio;
        if !self.accept(log_alpha) {
            return Ok(false);
        }
        self.state.margins = margins;
        self.state.cached_log_lik = ll;
        self.state.cached_log_prior += prior_change;
        Ok(true)
    }

    /// One iteration: Move 1 or Move 2 with equal probability.
    pub fn step(&mut self, record_flows: bool) -> Result<()> {
        if self.rng.random::<f64>() < 0.5 {
            let m = self.state.theta.m();
            let (p_within, p_birth, _) = move_probs(m);
            let v = self.rng.random::<f64>();
            if v < p_within {
                let ok = self.move_within()?;
                self.trace.acceptance.within.record(ok);
            } else if v < p_within + p_birth {
                let ok = self.move_birth()?;
                self.trace.acceptance.birth.record(ok);
                if ok && record_flows {
                    *self.trace.births_from.entry(m).or_default() += 1;
                }
            } else {
                let ok = self.move_death()?;
                self.trace.acceptance.death.record(ok);
                if ok && record_flows {
                    *self.trace.deaths_from.entry(m).or_default() += 1;
                }
            }
        } else {
            let ok = self.move_margins()?;
            self.trace.acceptance.margins.record(ok);
        }
        Ok(())
    }

    fn check_cache(&self) -> Result<()> {
        let (ll, lp) = self.recompute()?;
        let s = &self.state;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        if !close(ll, s.cached_log_lik) || !close(lp, s.cached_log_prior) {
            return Err(Error::Invariant(format!(
                "cached log densities ({}, {}) drifted from ({ll}, {lp})",
                s.cached_log_lik, s.cached_log_prior
            )));
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<Trace> {
        let c = self.config;
        for t in 1..=c.iterations {
            let post_burn = t > c.burn_in;
            self.step(post_burn)?;
            if cfg!(debug_assertions) && t % CACHE_CHECK_EVERY == 0 {
                self.check_cache()?;
            }
            if post_burn && (t - c.burn_in).is_multiple_of(c.thin) {
                let s = &self.state;
                let record = TraceRecord::new(t, &s.theta, &s.margins, s.cached_log_lik);
                self.trace.push(record);
            }
        }
        Ok(self.trace)
    }
}

/// `(p1, p2, p3)`: within-model, birth and death probabilities inside Move 1.
pub fn move_probs(m: usize) -> (f64, f64, f64) {
    if m <= 1 {
        (0.5, 0.5, 0.0)
    } else {
        (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    }
}

pub fn run_chain(data: &CensoredSample, config: &ChainConfig) -> Result<Trace> {
    let prior = Prior::new(config.prior)?;
    run_chain_with_prior(data, config, &prior)
}

pub fn run_chain_with_prior(
    data: &CensoredSample,
    config: &ChainConfig,
    prior: &Prior,
) -> Result<Trace> {
    Sampler::new(data, config, prior)?.run()
}

/// Independent chains on threads, seeded `seed, seed + 1, …`, sharing the
/// normaliser cache.
pub fn run_chains(
    data: &CensoredSample,
    config: &ChainConfig,
    chains: usize,
) -> Result<Vec<Trace>> {
    if chains == 0 {
        return invalid("at least one chain is required");
    }
    let prior = Prior::new(config.prior)?;
    let configs: Vec<ChainConfig> = (0..chains)
        .map(|i| ChainConfig {
            seed: config.seed.wrapping_add(i as u64),
            ..config.clone()
        })
        .collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let prior = &prior;
                scope.spawn(move || run_chain_with_prior(data, cfg, prior))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .map_err(|_| Error::Invariant("chain thread panicked".into()))?
            })
            .collect()
    })
}
