//! Bivariate tail model above a pair of thresholds: threshold-anchored
//! extreme-value margins, the stable tail dependence function `ℓ` of a
//! spectral measure, and the censored likelihood.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{MomentKind, SpectralDistribution};

/// Below this `|ξ|` the exponential limit of the margin is used.
pub const XI_ZERO: f64 = 1e-9;
/// Largest rounding-level negative `Δℓ` tolerated before it is clipped to 0.
pub const DELTA_ELL_SLACK: f64 = 1e-12;

/// Margin `-log F(x) = ζ (1 + ξ (x - u)/σ)^{-1/ξ}` above the threshold `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    pub xi: f64,
    pub zeta: f64,
    pub sigma: f64,
    pub u: f64,
}

impl MarginParams {
    pub fn new(xi: f64, zeta: f64, sigma: f64, u: f64) -> Result<Self> {
        let out = Self { xi, zeta, sigma, u };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi.is_finite() && self.u.is_finite()) {
            return Err(Error::Domain("non-finite margin parameter".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "scale {} must be positive",
                self.sigma
            )));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(Error::Domain(format!(
                "rate {} must be positive",
                self.zeta
            )));
        }
        Ok(())
    }

    /// Finite right end of the support, present when `ξ < 0`.
    pub fn upper_endpoint(&self) -> Option<f64> {
        (self.xi < -XI_ZERO).then(|| self.u - self.sigma / self.xi)
    }

    // ln(1 + ξ (x - u)/σ) / ξ, or None beyond the support
    fn scaled_log(&self, x: f64) -> Option<f64> {
        let t = (x - self.u) / self.sigma;
        if self.xi.abs() < XI_ZERO {
            return Some(t);
        }
        let z = self.xi * t;
        (z > -1.0).then(|| z.ln_1p() / self.xi)
    }

    /// `-log F(x)`; zero above a finite upper endpoint.
    pub fn neg_log_cdf(&self, x: f64) -> Result<f64> {
        self.validate()?;
        match self.scaled_log(x) {
            Some(l) => Ok(self.zeta * (-l).exp()),
            None if self.xi < 0.0 => Ok(0.0),
            None => Err(Error::Domain(format!(
                "x = {x} lies below the lower end of the support"
            ))),
        }
    }

    /// `log(-d/dx (-log F(x)))`, i.e. `log[(ζ/σ)(1 + ξ(x-u)/σ)^{-1/ξ-1}]`;
    /// `-∞` outside the support.
    pub fn log_jacobian(&self, x: f64) -> f64 {
        match self.scaled_log(x) {
            Some(l) => {
                let inner = if self.xi.abs() < XI_ZERO {
                    0.0
                } else {
                    (self.xi * (x - self.u) / self.sigma).ln_1p()
                };
                let jac = self.zeta.ln() - self.sigma.ln() - l - inner;
                if jac.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    jac
                }
            }
            None => f64::NEG_INFINITY,
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok((-self.neg_log_cdf(x)?).exp())
    }

    /// Marginal density `f(x) = J(x) F(x)`.
    pub fn density(&self, x: f64) -> Result<f64> {
        let s = self.neg_log_cdf(x)?;
        Ok((self.log_jacobian(x) - s).exp())
    }

    /// Inverse of [`MarginParams::cdf`] for `p ∈ [F(u), 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Range(format!("probability {p} outside (0, 1)")));
        }
        let ratio = (-p.ln()) / self.zeta;
        if self.xi.abs() < XI_ZERO {
            return Ok(self.u - self.sigma * ratio.ln());
        }
        Ok(self.u + self.sigma * (ratio.powf(-self.xi) - 1.0) / self.xi)
    }
}

/// `-log F(x)` for the margin; see [`MarginParams::neg_log_cdf`].
pub fn marginal_neg_log_cdf(x: f64, margin: &MarginParams) -> Result<f64> {
    margin.neg_log_cdf(x)
}

/// Value and partial derivatives of `ℓ(s, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllEval {
    pub value: f64,
    pub ds: f64,
    pub dt: f64,
    pub dst: f64,
}

impl EllEval {
    /// `∂sℓ ∂tℓ - ∂s∂tℓ`.
    pub fn delta(&self) -> f64 {
        self.ds * self.dt - self.dst
    }
}

/// Stable tail dependence function `ℓ(s, t) = 2 ∫ max(ws, (1-w)t) H(dw)` with
/// its first and mixed partial derivatives.
pub fn ell<H: SpectralDistribution + ?Sized>(s: f64, t: f64, h: &H) -> EllEval {
    let split = if s + t > 0.0 { t / (s + t) } else { 0.5 };
    let ds = 2.0 * (h.atom_at_one() + h.interior_moment(split, 1.0, MomentKind::W));
    let dt = 2.0 * (h.atom_at_zero() + h.interior_moment(0.0, split, MomentKind::OneMinusW));
    let sum = s + t;
    let dst = if s > 0.0 && t > 0.0 {
        -2.0 * s * t / (sum * sum * sum) * h.density(split)
    } else {
        0.0
    };
    EllEval {
        value: s * ds + t * dt,
        ds,
        dt,
        dst,
    }
}

/// Observation censored at the thresholds: `x* = max(x, u)` and the exceedance
/// indicators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensoredObservation {
    pub x1s: f64,
    pub x2s: f64,
    pub d: (bool, bool),
}

impl CensoredObservation {
    pub fn censor(x1: f64, x2: f64, u1: f64, u2: f64) -> Self {
        Self {
            x1s: x1.max(u1),
            x2s: x2.max(u2),
            d: (x1 >= u1, x2 >= u2),
        }
    }

    fn check(&self, m1: &MarginParams, m2: &MarginParams) -> Result<()> {
        let ok = |x: f64, d: bool, u: f64| if d { x >= u } else { x == u };
        if !ok(self.x1s, self.d.0, m1.u) || !ok(self.x2s, self.d.1, m2.u) {
            return invalid(format!(
                "observation {self:?} inconsistent with thresholds ({}, {})",
                m1.u, m2.u
            ));
        }
        Ok(())
    }
}

/// Model joint distribution function `exp{-ℓ(-log F1(x1), -log F2(x2))}` on
/// the quadrant above the thresholds.
pub fn joint_cdf<H: SpectralDistribution + ?Sized>(
    x1: f64,
    x2: f64,
    h: &H,
    m1: &MarginParams,
    m2: &MarginParams,
) -> Result<f64> {
    let (s1, s2) = (m1.neg_log_cdf(x1)?, m2.neg_log_cdf(x2)?);
    Ok((-ell(s1, s2, h).value).exp())
}

/// Log of the censored density `f*`, dispatched on the exceedance pattern.
pub fn log_censored_density<H: SpectralDistribution + ?Sized>(
    obs: &CensoredObservation,
    h: &H,
    m1: &MarginParams,
    m2: &MarginParams,
) -> Result<f64> {
    m1.validate()?;
    m2.validate()?;
    obs.check(m1, m2)?;
    let s1 = m1.neg_log_cdf(obs.x1s)?;
    let s2 = m2.neg_log_cdf(obs.x2s)?;
    let e = ell(s1, s2, h);
    Ok(match obs.d {
        (false, false) => -e.value,
        (true, false) => m1.log_jacobian(obs.x1s) + e.ds.ln() - e.value,
        (false, true) => m2.log_jacobian(obs.x2s) + e.dt.ln() - e.value,
        (true, true) => {
            let jac = m1.log_jacobian(obs.x1s) + m2.log_jacobian(obs.x2s);
            if jac == f64::NEG_INFINITY {
                return Ok(f64::NEG_INFINITY);
            }
            jac + log_delta(&e)? - e.value
        }
    })
}

fn log_delta(e: &EllEval) -> Result<f64> {
    let delta = e.delta();
    if delta < -DELTA_ELL_SLACK {
        return Err(Error::Invariant(format!("negative Δℓ = {delta}")));
    }
    Ok(delta.max(0.0).ln())
}

pub fn censored_density<H: SpectralDistribution + ?Sized>(
    obs: &CensoredObservation,
    h: &H,
    m1: &MarginParams,
    m2: &MarginParams,
) -> Result<f64> {
    Ok(log_censored_density(obs, h, m1, m2)?.exp())
}

/// Censored log-likelihood, summed in input order.
pub fn log_likelihood<H: SpectralDistribution + ?Sized>(
    sample: &[CensoredObservation],
    h: &H,
    m1: &MarginParams,
    m2: &MarginParams,
) -> Result<f64> {
    let mut total = 0.0;
    for obs in sample {
        total += log_censored_density(obs, h, m1, m2)?;
        if total == f64::NEG_INFINITY {
            break;
        }
    }
    Ok(total)
}

/// Censored sample grouped by exceedance pattern, so the fully censored
/// observations cost one evaluation of `ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredSample {
    pub u1: f64,
    pub u2: f64,
    pub n_censored: usize,
    pub only_first: Vec<f64>,
    pub only_second: Vec<f64>,
    pub both: Vec<(f64, f64)>,
}

impl CensoredSample {
    pub fn new(observations: &[CensoredObservation], u1: f64, u2: f64) -> Self {
        let mut out = Self {
            u1,
            u2,
            n_censored: 0,
            only_first: Vec::new(),
            only_second: Vec::new(),
            both: Vec::new(),
        };
        for o in observations {
            match o.d {
                (false, false) => out.n_censored += 1,
                (true, false) => out.only_first.push(o.x1s),
                (false, true) => out.only_second.push(o.x2s),
                (true, true) => out.both.push((o.x1s, o.x2s)),
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.n_censored + self.only_first.len() + self.only_second.len() + self.both.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Counts per quadrant in the order (0,0), (1,0), (0,1), (1,1).
    pub fn quadrant_counts(&self) -> [usize; 4] {
        [
            self.n_censored,
            self.only_first.len(),
            self.only_second.len(),
            self.both.len(),
        ]
    }

    pub fn exceedances_first(&self) -> impl Iterator<Item = f64> + '_ {
        self.only_first
            .iter()
            .copied()
            .chain(self.both.iter().map(|b| b.0))
    }

    pub fn exceedances_second(&self) -> impl Iterator<Item = f64> + '_ {
        self.only_second
            .iter()
            .copied()
            .chain(self.both.iter().map(|b| b.1))
    }

    /// Same value as [`log_likelihood`] on the ungrouped observations.
    pub fn log_likelihood<H: SpectralDistribution + ?Sized>(
        &self,
        h: &H,
        m1: &MarginParams,
        m2: &MarginParams,
    ) -> Result<f64> {
        m1.validate()?;
        m2.validate()?;
        if m1.u != self.u1 || m2.u != self.u2 {
            return invalid("margin thresholds differ from the censoring thresholds");
        }
        let (z1, z2) = (m1.zeta, m2.zeta);
        let mut total = 0.0;
        if self.n_censored > 0 {
            total -= self.n_censored as f64 * ell(z1, z2, h).value;
        }
        for &x in &self.only_first {
            let e = ell(m1.neg_log_cdf(x)?, z2, h);
            total += m1.log_jacobian(x) + e.ds.ln() - e.value;
            if total == f64::NEG_INFINITY {
                return Ok(total);
            }
        }
        for &x in &self.only_second {
            let e = ell(z1, m2.neg_log_cdf(x)?, h);
            total += m2.log_jacobian(x) + e.dt.ln() - e.value;
            if total == f64::NEG_INFINITY {
                return Ok(total);
            }
        }
        for &(x1, x2) in &self.both {
            let jac = m1.log_jacobian(x1) + m2.log_jacobian(x2);
            if jac == f64::NEG_INFINITY {
                return Ok(jac);
            }
            let e = ell(m1.neg_log_cdf(x1)?, m2.neg_log_cdf(x2)?, h);
            total += jac + log_delta(&e)? - e.value;
            if total == f64::NEG_INFINITY {
                return Ok(total);
            }
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{DiscreteSpectral, SpectralMeasure, SpectralParams};
    use crate::synthetic::HrMeasure;

    fn independence() -> SpectralMeasure {
        SpectralMeasure::bernoulli()
    }

    #[test]
    fn margin_values() {
        let m = MarginParams::new(1.0, 0.1, 1.0, 3.0).unwrap();
        assert_eq!(m.neg_log_cdf(3.0).unwrap(), 0.1);
        assert!((m.neg_log_cdf(12.0).unwrap() - 0.01).abs() < 1e-15);
        let m = MarginParams::new(-0.5, 0.2, 1.0, 0.0).unwrap();
        assert_eq!(m.upper_endpoint(), Some(2.0));
        assert_eq!(m.neg_log_cdf(2.0).unwrap(), 0.0);
        assert_eq!(m.neg_log_cdf(5.0).unwrap(), 0.0);
        assert_eq!(m.log_jacobian(5.0), f64::NEG_INFINITY);
        let g = MarginParams::new(0.0, 0.1, 2.0, 1.0).unwrap();
        assert!((g.neg_log_cdf(3.0).unwrap() - 0.1 * (-1.0f64).exp()).abs() < 1e-16);
        let nearly = MarginParams::new(1e-8, 0.1, 2.0, 1.0).unwrap();
        assert!((nearly.neg_log_cdf(3.0).unwrap() - g.neg_log_cdf(3.0).unwrap()).abs() < 1e-9);
        assert!(MarginParams::new(0.1, 0.0, 1.0, 0.0).is_err());
        assert!(MarginParams::new(0.1, 0.1, -1.0, 0.0).is_err());
        // below the lower end of a heavy-tailed support
        let heavy = MarginParams::new(1.0, 0.1, 1.0, 3.0).unwrap();
        assert!(heavy.neg_log_cdf(1.5).is_err());
    }

    #[test]
    fn margin_quantile_inverts_cdf() {
        for xi in [-0.3, 0.0, 0.4] {
            let m = MarginParams::new(xi, 0.1, 2.0, 5.0).unwrap();
            for x in [5.0, 6.0, 7.5] {
                let p = m.cdf(x).unwrap();
                assert!((m.quantile(p).unwrap() - x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn independence_and_comonotone() {
        let comonotone = DiscreteSpectral::new(vec![(0.5, 1.0)]).unwrap();
        for &(s, t) in &[(0.3, 0.7), (2.0, 0.1), (1.0, 1.0)] {
            let e = ell(s, t, &independence());
            assert!((e.value - (s + t)).abs() < 1e-15);
            assert_eq!(e.dst, 0.0);
            assert!((ell(s, t, &comonotone).value - f64::max(s, t)).abs() < 1e-15);
        }
        let z = ell(0.0, 0.0, &independence());
        assert_eq!((z.value, z.dst), (0.0, 0.0));
    }

    #[test]
    fn ell_margins_and_bounds() {
        let theta = SpectralParams::new(0.05, 0.15, vec![0.2375, 0.4375, 0.6375]).unwrap();
        let h = SpectralMeasure::build(&theta).unwrap();
        assert!((ell(0.37, 0.0, &h).value - 0.37).abs() < 1e-12);
        assert!((ell(0.0, 0.81, &h).value - 0.81).abs() < 1e-12);
        let e = ell(0.4, 0.9, &h);
        assert!(e.value >= 0.9 && e.value <= 1.3);
        assert!(e.dst <= 0.0);
    }

    #[test]
    fn hr_half_matches_closed_form() {
        // 2[(1 - r) + r ∫ max(w, 1 - w) dw] = 2(1/2 + 3/8)
        let h = HrMeasure::new(0.5).unwrap();
        let e = ell(1.0, 1.0, &h);
        assert!((e.value - 1.75).abs() < 1e-15);
    }

    #[test]
    fn censored_branches_under_independence() {
        let m1 = MarginParams::new(0.2, 0.1, 1.0, 0.0).unwrap();
        let m2 = MarginParams::new(-0.1, 0.1, 2.0, 1.0).unwrap();
        let h = independence();
        let corner = CensoredObservation::censor(-1.0, 0.0, 0.0, 1.0);
        let v = censored_density(&corner, &h, &m1, &m2).unwrap();
        assert!((v - (-0.2f64).exp()).abs() < 1e-15);
        assert!((v - 0.81873).abs() < 1e-5);

        let both = CensoredObservation::censor(1.3, 2.2, 0.0, 1.0);
        let joint = censored_density(&both, &h, &m1, &m2).unwrap();
        let product = m1.density(1.3).unwrap() * m2.density(2.2).unwrap();
        assert!((joint - product).abs() < 1e-15 * product.max(1.0));

        let bad = CensoredObservation {
            x1s: -1.0,
            x2s: 2.0,
            d: (false, true),
        };
        assert!(log_censored_density(&bad, &h, &m1, &m2).is_err());
    }

    #[test]
    fn likelihood_edge_cases() {
        let m1 = MarginParams::new(0.2, 0.1, 1.0, 0.0).unwrap();
        let m2 = MarginParams::new(0.2, 0.1, 1.0, 0.0).unwrap();
        let h = independence();
        assert_eq!(log_likelihood(&[], &h, &m1, &m2).unwrap(), 0.0);
        let obs = CensoredObservation::censor(-1.0, -1.0, 0.0, 0.0);
        assert!((log_likelihood(&[obs], &h, &m1, &m2).unwrap() + 0.2).abs() < 1e-15);
        let many = vec![obs; 17];
        assert!((log_likelihood(&many, &h, &m1, &m2).unwrap() + 17.0 * 0.2).abs() < 1e-13);
        // an exceedance above a finite endpoint has zero density
        let bounded = MarginParams::new(-0.5, 0.1, 1.0, 0.0).unwrap();
        let far = CensoredObservation::censor(10.0, -1.0, 0.0, 0.0);
        let ll = log_likelihood(&[obs, far], &h, &bounded, &m2).unwrap();
        assert_eq!(ll, f64::NEG_INFINITY);
    }

    #[test]
    fn grouped_likelihood_matches_ungrouped() {
        let theta = SpectralParams::new(0.1, 0.1, vec![0.3, 0.7]).unwrap();
        let h = SpectralMeasure::build(&theta).unwrap();
        let m1 = MarginParams::new(0.3, 0.12, 1.5, 2.0).unwrap();
        let m2 = MarginParams::new(-0.1, 0.08, 0.7, 1.0).unwrap();
        let raw = [
            (0.0, 0.0),
            (2.5, 0.3),
            (1.0, 3.0),
            (4.0, 2.2),
            (2.1, 1.4),
            (0.1, 0.5),
        ];
        let obs: Vec<_> = raw
            .iter()
            .map(|(a, b)| CensoredObservation::censor(*a, *b, 2.0, 1.0))
            .collect();
        let direct = log_likelihood(&obs, &h, &m1, &m2).unwrap();
        let grouped = CensoredSample::new(&obs, 2.0, 1.0)
            .log_likelihood(&h, &m1, &m2)
            .unwrap();
        assert!((direct - grouped).abs() < 1e-12);
    }
}
