//! Prior densities: the MDI prior on each margin, the zero-truncated Poisson
//! prior on the number of interior atoms, and the uniform prior on `Θ_m` with
//! its normalising constants.

use std::collections::BTreeMap;
use std::sync::Mutex;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussLegendre;
use crate::spectral::SpectralParams;
use crate::tail::MarginParams;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const DEFAULT_LAMBDA: f64 = 5.0;
pub const DEFAULT_QUADRATURE_NODES: usize = 64;
/// Up to this many atoms the alternating sum is used for the simplex maximum.
pub const ALTERNATING_SUM_MAX_M: usize = 30;

/// Unnormalised MDI log prior `log ζ - log σ - (1 + ξ)(γ + log ζ)`.
pub fn mdi_log_prior(margin: &MarginParams) -> f64 {
    if !(margin.sigma > 0.0 && margin.zeta > 0.0) {
        return f64::NEG_INFINITY;
    }
    let lz = margin.zeta.ln();
    lz - margin.sigma.ln() - (1.0 + margin.xi) * (EULER_GAMMA + lz)
}

/// `log π(m)` for the Poisson(λ) distribution truncated at zero.
pub fn model_log_prior(m: usize, lambda: f64) -> Result<f64> {
    if m == 0 {
        return invalid("the model index m must be at least 1");
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("λ = {lambda} must be positive"));
    }
    // log(e^λ - 1) without overflow
    let log_norm = lambda + (-(-lambda).exp()).ln_1p();
    Ok(m as f64 * lambda.ln() - log_norm - ln_gamma(m as f64 + 1.0))
}

/// Draw from the zero-truncated Poisson(λ).
pub fn sample_model<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> Result<usize> {
    let poisson =
        Poisson::new(lambda).map_err(|e| Error::InvalidInput(format!("λ = {lambda}: {e}")))?;
    loop {
        let m = poisson.sample(rng) as usize;
        if m > 0 {
            return Ok(m);
        }
    }
}

/// `P(max_i Y_i < y)` for `Y` uniform on the unit simplex in `R^m`.
pub fn simplex_max_cdf(m: usize, y: f64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    if y >= 1.0 {
        return 1.0;
    }
    if m == 1 || y <= 1.0 / m as f64 {
        return 0.0;
    }
    let p = if m <= ALTERNATING_SUM_MAX_M {
        alternating_sum(m, y)
    } else {
        scaled_irwin_hall(m, 1.0 / y)
    };
    p.clamp(0.0, 1.0)
}

// Σ_k (-1)^k C(m,k) (1 - k y)^{m-1} over k y < 1
fn alternating_sum(m: usize, y: f64) -> f64 {
    let mf = m as f64;
    let ln_m_fact = ln_gamma(mf + 1.0);
    let mut acc = Neumaier::default();
    let mut k = 0usize;
    while k <= m && (k as f64) * y < 1.0 {
        let kf = k as f64;
        let ln_binom = ln_m_fact - ln_gamma(kf + 1.0) - ln_gamma(mf - kf + 1.0);
        let term = (ln_binom + (mf - 1.0) * (1.0 - kf * y).ln()).exp();
        acc.add(if k.is_multiple_of(2) { term } else { -term });
        k += 1;
    }
    acc.total()
}

// (m-1)! f_m(x) / x^{m-1} with f_m the Irwin-Hall density, through a
// recursion whose terms are all nonnegative.
fn scaled_irwin_hall(m: usize, x: f64) -> f64 {
    let mut g: Vec<f64> = (0..=m)
        .map(|j| {
            let v = x - j as f64;
            if (0.0..1.0).contains(&v) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for k in 2..=m {
        let kf = k as f64;
        for j in 0..m {
            let v = x - j as f64;
            g[j] = if v < 0.0 || v > kf {
                0.0
            } else {
                (v / x) * g[j] + ((kf - v) / x) * g[j + 1]
            };
        }
        g[m] = 0.0;
    }
    g[0]
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    compensation: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Surface measure `μ_{m-1}` of the slice `Θ_{m,h0,h1}` of ordered atom
/// locations compatible with the atoms `h0`, `h1`.
pub fn slice_measure(m: usize, h0: f64, h1: f64) -> f64 {
    if m == 0 || !(0.0..0.5).contains(&h0) || !(0.0..0.5).contains(&h1) {
        return 0.0;
    }
    let mf = m as f64;
    let c = mf * (0.5 - h1) / (1.0 - h0 - h1);
    let p = simplex_max_cdf(m, 1.0 / c);
    if p <= 0.0 {
        return 0.0;
    }
    (0.5 * mf.ln() - ln_gamma(mf + 1.0) - ln_gamma(mf) + (mf - 1.0) * c.ln() + p.ln()).exp()
}

/// `μ_{m+1}(Θ_m)` by Gauss-Legendre quadrature of [`slice_measure`] over
/// `[0, 1/2]²`, with panels split where the integrand has kinks.
pub fn theta_normalizer(m: usize, quadrature_nodes: usize) -> Result<f64> {
    if m == 0 {
        return invalid("the model index m must be at least 1");
    }
    if m == 1 {
        return Ok(0.25);
    }
    if quadrature_nodes == 0 {
        return invalid("quadrature needs at least one node");
    }
    let gl = GaussLegendre::new(quadrature_nodes);
    let mf = m as f64;
    // kinks of the integrand sit where m(1/2 - h1)/(1 - h0 - h1) is an integer
    let mut outer = vec![0.0, 0.5];
    for k in 1..m {
        let kf = k as f64;
        if 2 * k < m {
            outer.push((mf - 2.0 * kf) / (2.0 * (mf - kf)));
        }
    }
    let outer = sorted_breaks(outer);
    let inner_integral = |h1: f64| {
        let mut inner = vec![0.0, 0.5];
        for k in 1..m {
            inner.push(1.0 - h1 - (mf / k as f64) * (0.5 - h1));
        }
        let inner = sorted_breaks(inner);
        inner
            .windows(2)
            .map(|w| gl.integrate(w[0], w[1], |h0| slice_measure(m, h0, h1)))
            .sum::<f64>()
    };
    let total: f64 = outer
        .windows(2)
        .map(|w| gl.integrate(w[0], w[1], &inner_integral))
        .sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Invariant(format!(
            "normaliser for m = {m} evaluated to {total}"
        )));
    }
    Ok(total)
}

fn sorted_breaks(mut points: Vec<f64>) -> Vec<f64> {
    points.retain(|p| (0.0..=0.5).contains(p));
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    points
}

/// Support of the margin prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginSupport {
    pub xi_min: f64,
    pub xi_max: f64,
    pub zeta_max: f64,
}

impl Default for MarginSupport {
    fn default() -> Self {
        Self {
            xi_min: -1.0,
            xi_max: 1.0,
            zeta_max: 1.0,
        }
    }
}

impl MarginSupport {
    pub fn contains(&self, m: &MarginParams) -> bool {
        m.xi > self.xi_min
            && m.xi < self.xi_max
            && m.zeta > 0.0
            && m.zeta <= self.zeta_max
            && m.sigma > 0.0
            && m.sigma.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub lambda: f64,
    pub quadrature_nodes: usize,
    pub support: MarginSupport,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            quadrature_nodes: DEFAULT_QUADRATURE_NODES,
            support: MarginSupport::default(),
        }
    }
}

/// Prior with a lazily filled cache of `μ_{m+1}(Θ_m)`; safe to share across
/// threads.
#[derive(Debug)]
pub struct Prior {
    config: PriorConfig,
    cache: Mutex<BTreeMap<usize, f64>>,
}

impl Prior {
    pub fn new(config: PriorConfig) -> Result<Self> {
        if !(config.lambda > 0.0 && config.lambda.is_finite()) {
            return invalid(format!("λ = {} must be positive", config.lambda));
        }
        if config.quadrature_nodes == 0 {
            return invalid("quadrature needs at least one node");
        }
        Ok(Self {
            config,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn config(&self) -> &PriorConfig {
        &self.config
    }

    pub fn lambda(&self) -> f64 {
        self.config.lambda
    }

    pub fn normalizer(&self, m: usize) -> Result<f64> {
        if let Some(v) = self.cache.lock().expect("cache poisoned").get(&m) {
            return Ok(*v);
        }
        let v = theta_normalizer(m, self.config.quadrature_nodes)?;
        self.cache.lock().expect("cache poisoned").insert(m, v);
        Ok(v)
    }

    /// Relative change of the normaliser when the node count doubles.
    pub fn refinement_gap(&self, m: usize) -> Result<f64> {
        let base = self.normalizer(m)?;
        let fine = theta_normalizer(m, 2 * self.config.quadrature_nodes)?;
        Ok((fine - base).abs() / fine)
    }

    /// `-log μ_{m+1}(Θ_m)`; `-∞` for the degenerate point.
    pub fn theta_log_prior(&self, theta: &SpectralParams) -> Result<f64> {
        if theta.is_degenerate() || theta.h0() >= 0.5 || theta.h1() >= 0.5 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(-self.normalizer(theta.m())?.ln())
    }

    pub fn model_log_prior(&self, m: usize) -> Result<f64> {
        model_log_prior(m, self.config.lambda)
    }

    /// MDI log prior restricted to the configured support.
    pub fn margin_log_prior(&self, margin: &MarginParams) -> f64 {
        if self.config.support.contains(margin) {
            mdi_log_prior(margin)
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn cache_snapshot(&self) -> BTreeMap<usize, f64> {
        self.cache.lock().expect("cache poisoned").clone()
    }

    pub fn dump_cache(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.cache_snapshot())
            .map_err(|e| Error::Invariant(format!("cache serialisation: {e}")))
    }

    pub fn load_cache(&self, json: &str) -> Result<()> {
        let entries: BTreeMap<usize, f64> = serde_json::from_str(json)
            .map_err(|e| Error::InvalidInput(format!("normaliser cache: {e}")))?;
        if let Some((m, v)) = entries
            .iter()
            .find(|(m, v)| **m == 0 || !(**v > 0.0 && v.is_finite()))
        {
            return invalid(format!("bad normaliser cache entry {m}: {v}"));
        }
        self.cache.lock().expect("cache poisoned").extend(entries);
        Ok(())
    }
}

/// Exact draw of `(m, θ)` from the prior, used as an independent check on the
/// sampler. Atom masses come from rejection against the slice measure; the
/// ordered atom locations from a reflected Dirichlet rejection step.
pub fn sample_prior_theta<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> Result<SpectralParams> {
    let m = sample_model(rng, lambda)?;
    let (h0, h1) = sample_prior_atoms(rng, m);
    let ys = sample_slice_locations(rng, m, h0, h1);
    SpectralParams::new(h0, h1, ys)
}

/// `(h0, h1)` with density proportional to the slice measure.
pub fn sample_prior_atoms<R: Rng + ?Sized>(rng: &mut R, m: usize) -> (f64, f64) {
    let peak = slice_measure(m, 0.25, 0.25);
    loop {
        let h0 = 0.5 * rng.random::<f64>();
        let h1 = 0.5 * rng.random::<f64>();
        if rng.random::<f64>() * peak <= slice_measure(m, h0, h1) {
            return (h0, h1);
        }
    }
}

/// Sorted atom locations uniform on the slice `Θ_{m,h0,h1}`.
pub fn sample_slice_locations<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    h0: f64,
    h1: f64,
) -> Vec<f64> {
    let total = m as f64 * (0.5 - h1) / (1.0 - h0 - h1);
    // sample on the reflected slice when that makes rejection cheaper
    let reflect = total > 0.5 * m as f64;
    let target = if reflect { m as f64 - total } else { total };
    loop {
        let e: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
        let s: f64 = e.iter().sum();
        let mut ys: Vec<f64> = e.iter().map(|v| target * v / s).collect();
        if ys.iter().any(|&y| y >= 1.0 || y <= 0.0) {
            continue;
        }
        if reflect {
            ys.iter_mut().for_each(|y| *y = 1.0 - *y);
        }
        ys.sort_by(f64::total_cmp);
        if ys
            .windows(2)
            .all(|w| w[1] - w[0] >= crate::spectral::MIN_ATOM_GAP)
        {
            return ys;
        }
    }
}
