//! Posterior predictive quantities: joint and conditional tail densities,
//! rare-event probabilities and conditional quantiles, each a Monte Carlo
//! average over the draws in a trace.

use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{invalid, Error, Result};
use crate::mcmc::{Trace, TraceRecord};
use crate::spectral::{SpectralDistribution, SpectralMeasure};
use crate::tail::{ell, MarginParams};

/// Bisection stops once the survival function is this close to the target.
pub const PROBABILITY_TOLERANCE: f64 = 1e-8;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone)]
pub struct PosteriorDraw<H = SpectralMeasure> {
    pub measure: H,
    pub margins: (MarginParams, MarginParams),
}

impl<H: SpectralDistribution> PosteriorDraw<H> {
    /// Joint density of an exceedance in both coordinates.
    pub fn joint_density(&self, x1: f64, x2: f64) -> Result<f64> {
        let (m1, m2) = &self.margins;
        let jac = m1.log_jacobian(x1) + m2.log_jacobian(x2);
        if jac == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let e = ell(m1.neg_log_cdf(x1)?, m2.neg_log_cdf(x2)?, &self.measure);
        Ok((jac + e.delta().max(0.0).ln() - e.value).exp())
    }

    /// Marginal density of `X1`, i.e. `∂F(x1, ∞)/∂x1`.
    pub fn marginal_density(&self, x1: f64) -> Result<f64> {
        self.margins.0.density(x1)
    }

    /// `∂F(x1, x2)/∂x1`: density of `X1` jointly with `X2 ≤ x2`.
    pub fn partial_first(&self, x1: f64, x2: f64) -> Result<f64> {
        let (m1, m2) = &self.margins;
        let jac = m1.log_jacobian(x1);
        if jac == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let e = ell(m1.neg_log_cdf(x1)?, m2.neg_log_cdf(x2)?, &self.measure);
        Ok((jac + e.ds.ln() - e.value).exp())
    }

    /// `P(X1 ≥ v1, X2 ≥ v2)` by inclusion-exclusion.
    pub fn joint_survival(&self, v1: f64, v2: f64) -> Result<f64> {
        let (m1, m2) = &self.margins;
        let (s1, s2) = (m1.neg_log_cdf(v1)?, m2.neg_log_cdf(v2)?);
        let l = ell(s1, s2, &self.measure).value;
        Ok((-(-s1).exp_m1() - (-s2).exp_m1() + (-l).exp_m1()).clamp(0.0, 1.0))
    }

    /// Mass below both thresholds, `exp{-ℓ(ζ1, ζ2)}`.
    pub fn corner_mass(&self) -> f64 {
        let (m1, m2) = &self.margins;
        (-ell(m1.zeta, m2.zeta, &self.measure).value).exp()
    }

    /// `P(X2 > x2 | X1 = x1)` under this draw alone.
    pub fn conditional_survival(&self, x1: f64, x2: f64) -> Result<Option<f64>> {
        let f1 = self.marginal_density(x1)?;
        if f1 <= 0.0 {
            return Ok(None);
        }
        Ok(Some(
            ((f1 - self.partial_first(x1, x2)?) / f1).clamp(0.0, 1.0),
        ))
    }
}

/// Draws of `(H, η1, η2)`, usually from a trace.
#[derive(Debug, Clone)]
pub struct Posterior<H = SpectralMeasure> {
    draws: Vec<PosteriorDraw<H>>,
    thresholds: (f64, f64),
}

impl Posterior {
    pub fn from_records(records: &[TraceRecord], u1: f64, u2: f64) -> Result<Self> {
        let draws = records
            .iter()
            .map(|r| {
                Ok(PosteriorDraw {
                    measure: r.measure()?,
                    margins: r.margins(u1, u2)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(draws)
    }

    pub fn from_trace(trace: &Trace) -> Result<Self> {
        Self::from_records(&trace.records, trace.thresholds.0, trace.thresholds.1)
    }
}

impl<H: SpectralDistribution> Posterior<H> {
    pub fn new(draws: Vec<PosteriorDraw<H>>) -> Result<Self> {
        let Some(first) = draws.first() else {
            return Err(Error::EmptyTrace);
        };
        let thresholds = (first.margins.0.u, first.margins.1.u);
        if draws
            .iter()
            .any(|d| d.margins.0.u != thresholds.0 || d.margins.1.u != thresholds.1)
        {
            return invalid("all draws must share the thresholds");
        }
        Ok(Self { draws, thresholds })
    }

    pub fn draws(&self) -> &[PosteriorDraw<H>] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn thresholds(&self) -> (f64, f64) {
        self.thresholds
    }

    fn average(&self, f: impl Fn(&PosteriorDraw<H>) -> Result<f64>) -> Result<f64> {
        let mut total = 0.0;
        for d in &self.draws {
            total += f(d)?;
        }
        Ok(total / self.draws.len() as f64)
    }

    /// Predictive marginal density of `X1` at `x1 ≥ u1`.
    pub fn marginal_density(&self, x1: f64) -> Result<f64> {
        self.average(|d| d.marginal_density(x1))
    }

    pub fn corner_mass(&self) -> f64 {
        self.draws
            .iter()
            .map(PosteriorDraw::<H>::corner_mass)
            .sum::<f64>()
            / self.draws.len() as f64
    }

    /// Predictive `P(X2 > x2 | X1 = x1)`.
    pub fn conditional_survival(&self, x1: f64, x2: f64) -> Result<f64> {
        let f1 = self.marginal_density(x1)?;
        if f1 <= 0.0 {
            return Err(Error::Domain(format!(
                "x1 = {x1} has zero predictive density"
            )));
        }
        let partial = self.average(|d| d.partial_first(x1, x2))?;
        Ok(((f1 - partial) / f1).clamp(0.0, 1.0))
    }
}

/// Joint predictive density of exceedances on a rectangular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveGrid {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    /// `density[i][j]` at `(x1[i], x2[j])`.
    pub density: Vec<Vec<f64>>,
    /// Predictive mass of the censored corner below both thresholds.
    pub corner_mass: f64,
    /// Axis values dropped for lying below their threshold.
    pub excluded: usize,
    pub draws: usize,
}

impl PredictiveGrid {
    /// Long-format rows `(x1, x2, density)`.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.x1.iter().enumerate().flat_map(move |(i, &a)| {
            self.x2
                .iter()
                .enumerate()
                .map(move |(j, &b)| (a, b, self.density[i][j]))
        })
    }
}

fn check_axis(axis: &[f64], u: f64, name: &str) -> Result<(Vec<f64>, usize)> {
    if axis.iter().any(|x| !x.is_finite()) {
        return invalid(format!("{name} grid has non-finite values"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return invalid(format!("{name} grid must be strictly increasing"));
    }
    let kept: Vec<f64> = axis.iter().copied().filter(|x| *x >= u).collect();
    let dropped = axis.len() - kept.len();
    Ok((kept, dropped))
}

pub fn joint_predictive<H: SpectralDistribution>(
    posterior: &Posterior<H>,
    grid1: &[f64],
    grid2: &[f64],
) -> Result<PredictiveGrid> {
    let (u1, u2) = posterior.thresholds();
    let (x1, e1) = check_axis(grid1, u1, "x1")?;
    let (x2, e2) = check_axis(grid2, u2, "x2")?;
    let mut density = vec![vec![0.0; x2.len()]; x1.len()];
    for (i, &a) in x1.iter().enumerate() {
        for (j, &b) in x2.iter().enumerate() {
            density[i][j] = posterior.average(|d| d.joint_density(a, b))?;
        }
    }
    Ok(PredictiveGrid {
        x1,
        x2,
        density,
        corner_mass: posterior.corner_mass(),
        excluded: e1 + e2,
        draws: posterior.len(),
    })
}

/// Predictive distribution of `X2` given `X1 = x1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalPredictive {
    pub x1: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub cdf: Vec<f64>,
    pub marginal_density: f64,
    /// `P(X2 < u2 | X1 = x1)`.
    pub below_threshold: f64,
    /// Draws with zero marginal density at `x1`.
    pub excluded_draws: usize,
}

pub fn conditional_predictive<H: SpectralDistribution>(
    posterior: &Posterior<H>,
    x1: f64,
    grid2: &[f64],
) -> Result<ConditionalPredictive> {
    let (u1, u2) = posterior.thresholds();
    if x1 < u1 {
        return Err(Error::Range(format!(
            "x1 = {x1} lies below the threshold {u1}"
        )));
    }
    let (grid, _) = check_axis(grid2, u2, "x2")?;
    let excluded_draws = posterior
        .draws()
        .iter()
        .map(|d| d.marginal_density(x1))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .filter(|f| **f <= 0.0)
        .count();
    let f1 = posterior.marginal_density(x1)?;
    if f1 <= 0.0 {
        return Err(Error::Domain(format!(
            "x1 = {x1} has zero predictive density; cannot condition on it"
        )));
    }
    let mut density = Vec::with_capacity(grid.len());
    let mut cdf = Vec::with_capacity(grid.len());
    for &b in &grid {
        density.push(posterior.average(|d| d.joint_density(x1, b))? / f1);
        cdf.push((posterior.average(|d| d.partial_first(x1, b))? / f1).clamp(0.0, 1.0));
    }
    let below_threshold = (posterior.average(|d| d.partial_first(x1, u2))? / f1).clamp(0.0, 1.0);
    Ok(ConditionalPredictive {
        x1,
        grid,
        density,
        cdf,
        marginal_density: f1,
        below_threshold,
        excluded_draws,
    })
}

// Solve survival(x) = p on [lo, ∞) for a nonincreasing survival function with
// survival(lo) ≥ p.
fn invert_survival(
    mut survival: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    scale: f64,
    p: f64,
) -> Result<f64> {
    let at_lo = survival(lo)?;
    if (at_lo - p).abs() <= PROBABILITY_TOLERANCE {
        return Ok(lo);
    }
    let mut step = scale.max(1e-12);
    let mut hi = lo + step;
    let mut low = lo;
    let mut expansions = 0;
    while survival(hi)? > p {
        low = hi;
        step *= 2.0;
        hi = lo + step;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Range(format!("no level found with survival {p}")));
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (low + hi);
        let s = survival(mid)?;
        if (s - p).abs() <= PROBABILITY_TOLERANCE || hi - low <= 1e-14 * hi.abs().max(1.0) {
            return Ok(mid);
        }
        if s > p {
            low = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (low + hi))
}

fn typical_scale<H: SpectralDistribution>(posterior: &Posterior<H>) -> f64 {
    let d = posterior.draws();
    d.iter().map(|d| d.margins.1.sigma).sum::<f64>() / d.len() as f64
}

/// Level `x2` with predictive `P(X2 > x2 | X1 = x1) = p`.
pub fn conditional_quantile<H: SpectralDistribution>(
    posterior: &Posterior<H>,
    x1: f64,
    p: f64,
) -> Result<f64> {
    let (u1, u2) = posterior.thresholds();
    if x1 < u1 {
        return Err(Error::Range(format!(
            "x1 = {x1} lies below the threshold {u1}"
        )));
    }
    let top = posterior.conditional_survival(x1, u2)?;
    if !(p > 0.0 && p <= top + PROBABILITY_TOLERANCE) {
        return Err(Error::Range(format!(
            "p = {p} is not attainable; it must lie in (0, {top}]"
        )));
    }
    invert_survival(
        |x| posterior.conditional_survival(x1, x),
        u2,
        typical_scale(posterior),
        p,
    )
}

/// Same as [`conditional_quantile`] but conditioning also on `X2 > u2`.
pub fn conditional_exceedance_quantile<H: SpectralDistribution>(
    posterior: &Posterior<H>,
    x1: f64,
    p: f64,
) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Range(format!("p = {p} outside (0, 1]")));
    }
    let top = posterior.conditional_survival(x1, posterior.thresholds().1)?;
    conditional_quantile(posterior, x1, p * top)
}

/// Predictive conditional quantile with the 95% spread of the per-draw
/// quantiles; draws that cannot reach `p` above the threshold count as `u2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub x1: f64,
    pub quantile: f64,
    pub lower_band: f64,
    pub upper_band: f64,
}

pub fn conditional_quantile_curve<H: SpectralDistribution>(
    posterior: &Posterior<H>,
    x1s: &[f64],
    p: f64,
) -> Result<Vec<QuantilePoint>> {
    let u2 = posterior.thresholds().1;
    x1s.iter()
        .map(|&x1| {
            let quantile = conditional_quantile(posterior, x1, p)?;
            let mut per_draw = Vec::with_capacity(posterior.len());
            for d in posterior.draws() {
                let q = match d.conditional_survival(x1, u2)? {
                    Some(top) if top > p => {
                        let s = |x: f64| Ok(d.conditional_survival(x1, x)?.unwrap_or(0.0));
                        invert_survival(s, u2, d.margins.1.sigma, p)?
                    }
                    _ => u2,
                };
                per_draw.push(q);
            }
            let mut data = Data::new(per_draw);
            Ok(QuantilePoint {
                x1,
                quantile,
                lower_band: data.quantile(0.025),
                upper_band: data.quantile(0.975),
            })
        })
        .collect()
}

/// Predictive `P(X1 ≥ v1, X2 ≥ v2)` for `v` at or above the thresholds.
pub fn rare_event_probability<H: SpectralDistribution>(
    posterior: &Posterior<H>,
    v1: f64,
    v2: f64,
) -> Result<f64> {
    let (u1, u2) = posterior.thresholds();
    if v1 < u1 || v2 < u2 {
        return Err(Error::Range(format!(
            "({v1}, {v2}) lies below the thresholds ({u1}, {u2})"
        )));
    }
    posterior.average(|d| d.joint_survival(v1, v2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;
    use crate::spectral::{DiscreteSpectral, SpectralParams};

    fn draw(theta: Option<SpectralParams>, xi: f64, zeta: f64) -> PosteriorDraw {
        let measure = match theta {
            Some(t) => SpectralMeasure::build(&t).unwrap(),
            None => SpectralMeasure::bernoulli(),
        };
        PosteriorDraw {
            measure,
            margins: (
                MarginParams::new(xi, zeta, 1.0, 1.0).unwrap(),
                MarginParams::new(xi, zeta, 2.0, 0.0).unwrap(),
            ),
        }
    }

    fn smooth() -> SpectralParams {
        SpectralParams::new(0.1, 0.1, vec![0.3, 0.5, 0.7]).unwrap()
    }

    #[test]
    fn rare_event_closed_form() {
        let p = Posterior::new(vec![draw(None, 0.2, 0.1)]).unwrap();
        let v = rare_event_probability(&p, 1.0, 0.0).unwrap();
        assert!((v - (1.0 - (-0.1f64).exp()).powi(2)).abs() < 1e-15);
        assert!((v - 0.00906).abs() < 1e-5);
        // comonotone with equal rates: the joint exceedance is the marginal one
        let como = PosteriorDraw {
            measure: DiscreteSpectral::new(vec![(0.5, 1.0)]).unwrap(),
            margins: draw(None, 0.2, 0.1).margins,
        };
        let p = Posterior::new(vec![como]).unwrap();
        let v = rare_event_probability(&p, 1.0, 0.0).unwrap();
        assert!((v - (1.0 - (-0.1f64).exp())).abs() < 1e-15, "{v}");
        assert!(rare_event_probability(&p, 0.0, 0.0).is_err());
    }

    #[test]
    fn rare_event_monotone_and_limit() {
        let p =
            Posterior::new(vec![draw(Some(smooth()), 0.3, 0.1), draw(None, -0.1, 0.05)]).unwrap();
        let grid: Vec<f64> = (0..20).map(|i| 1.0 + 0.4 * i as f64).collect();
        for i in 0..20 {
            for j in 0..20 {
                let v = rare_event_probability(&p, grid[i], grid[j] - 1.0).unwrap();
                assert!((0.0..=1.0).contains(&v));
                if i > 0 {
                    assert!(
                        v <= rare_event_probability(&p, grid[i - 1], grid[j] - 1.0).unwrap()
                            + 1e-15
                    );
                }
                if j > 0 {
                    assert!(
                        v <= rare_event_probability(&p, grid[i], grid[j - 1] - 1.0).unwrap()
                            + 1e-15
                    );
                }
            }
        }
        let far = rare_event_probability(&p, 2.0, 1e12).unwrap();
        let near = rare_event_probability(&p, 2.0, 0.0).unwrap();
        let marginal = p
            .draws()
            .iter()
            .map(|d| 1.0 - d.margins.0.cdf(2.0).unwrap())
            .sum::<f64>()
            / 2.0;
        assert!(far < 1e-12, "{far}");
        assert!(near > 0.0 && near <= marginal);
    }

    #[test]
    fn mixture_is_average_of_draws() {
        let a = draw(Some(smooth()), 0.3, 0.1);
        let b = draw(None, -0.1, 0.05);
        let both = Posterior::new(vec![a.clone(), b.clone()]).unwrap();
        let g1 = [1.0, 1.5, 3.0];
        let g2 = [0.0, 0.7, 4.0];
        let ja = joint_predictive(&Posterior::new(vec![a]).unwrap(), &g1, &g2).unwrap();
        let jb = joint_predictive(&Posterior::new(vec![b]).unwrap(), &g1, &g2).unwrap();
        let jab = joint_predictive(&both, &g1, &g2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let avg = 0.5 * (ja.density[i][j] + jb.density[i][j]);
                assert!((jab.density[i][j] - avg).abs() <= 1e-15 * avg.max(1e-300));
            }
        }
        assert_eq!(jab.rows().count(), 9);
        let dropped = joint_predictive(&both, &[0.5, 1.0], &g2).unwrap();
        assert_eq!((dropped.excluded, dropped.x1.len()), (1, 1));
    }

    #[test]
    fn conditional_normalises() {
        let p = Posterior::new(vec![draw(Some(smooth()), 0.2, 0.1)]).unwrap();
        let d = &p.draws()[0];
        let x1 = 2.0;
        let top = d.margins.1.quantile(1.0 - 1e-6).unwrap();
        let gl = GaussLegendre::new(64);
        let mass = gl.integrate_composite(0.0, top, 64, |x2| {
            conditional_predictive(&p, x1, &[x2]).unwrap().density[0]
        });
        let c = conditional_predictive(&p, x1, &[0.0, 1.0]).unwrap();
        assert!(
            (mass + c.below_threshold - 1.0).abs() < 1e-3,
            "{mass} + {}",
            c.below_threshold
        );
        assert!((c.cdf[0] - c.below_threshold).abs() < 1e-15);
        assert!(c.cdf[1] >= c.cdf[0]);
        assert_eq!(c.excluded_draws, 0);
    }

    #[test]
    fn independence_conditional_does_not_depend_on_x1() {
        let p = Posterior::new(vec![draw(None, 0.2, 0.1)]).unwrap();
        let q1 = conditional_quantile(&p, 1.5, 0.01).unwrap();
        let q2 = conditional_quantile(&p, 6.0, 0.01).unwrap();
        assert!((q1 - q2).abs() < 1e-6);
        let m2 = p.draws()[0].margins.1;
        assert!((q1 - m2.quantile(0.99).unwrap()).abs() < 1e-5);
    }

    #[test]
    fn quantile_round_trip_and_bounds() {
        let p =
            Posterior::new(vec![draw(Some(smooth()), 0.2, 0.1), draw(None, 0.1, 0.08)]).unwrap();
        let x1 = 3.0;
        let top = p.conditional_survival(x1, 0.0).unwrap();
        assert_eq!(conditional_quantile(&p, x1, top).unwrap(), 0.0);
        for target in [0.5 * top, 0.05, 0.01, 1e-4] {
            let q = conditional_quantile(&p, x1, target).unwrap();
            assert!((p.conditional_survival(x1, q).unwrap() - target).abs() < 1e-5);
        }
        let err = conditional_quantile(&p, x1, top + 0.1).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
        let e = conditional_exceedance_quantile(&p, x1, 1.0).unwrap();
        assert_eq!(e, 0.0);
        let curve = conditional_quantile_curve(&p, &[1.0, 2.0], 0.05).unwrap();
        for c in curve {
            assert!(c.lower_band <= c.upper_band);
        }
    }

    #[test]
    fn conditioning_outside_support_fails() {
        let bounded = PosteriorDraw {
            measure: SpectralMeasure::bernoulli(),
            margins: (
                MarginParams::new(-0.5, 0.1, 1.0, 1.0).unwrap(),
                MarginParams::new(0.1, 0.1, 1.0, 0.0).unwrap(),
            ),
        };
        let p = Posterior::new(vec![bounded]).unwrap();
        assert!(matches!(
            conditional_predictive(&p, 10.0, &[0.0]).unwrap_err(),
            Error::Domain(_)
        ));
        assert!(Posterior::<SpectralMeasure>::new(vec![]).is_err());
    }
}
