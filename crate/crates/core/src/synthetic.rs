//! Validation data from the family
//! `F_r(x1, x2) = (1 - 1/x1)(1 - 1/x2)(1 + r/(x1 + x2))`, `x1, x2 >= 1`,
//! whose margins are unit Pareto and whose extreme-value attractor has the
//! spectral measure `H_r` with atoms `(1 - r)/2` at 0 and 1 and constant
//! density `r` in between.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::{MomentKind, SpectralDistribution, UniformCdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrConfig {
    pub r: f64,
    pub n: usize,
    pub seed: u64,
}

impl FrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.r) {
            return invalid(format!("r = {} outside [0, 1]", self.r));
        }
        if self.n == 0 {
            return invalid("sample size must be positive");
        }
        Ok(())
    }
}

pub fn fr_cdf(x1: f64, x2: f64, r: f64) -> f64 {
    if x1 < 1.0 || x2 < 1.0 {
        return 0.0;
    }
    let a = if x1.is_infinite() {
        1.0
    } else {
        1.0 - 1.0 / x1
    };
    let b = if x2.is_infinite() {
        1.0
    } else {
        1.0 - 1.0 / x2
    };
    a * b * (1.0 + r / (x1 + x2))
}

/// Mixed partial derivative of [`fr_cdf`].
pub fn fr_density(x1: f64, x2: f64, r: f64) -> f64 {
    if x1 < 1.0 || x2 < 1.0 {
        return 0.0;
    }
    let s = x1 + x2;
    let (a, b) = (1.0 - 1.0 / x1, 1.0 - 1.0 / x2);
    let (q1, q2) = (x1 * x1, x2 * x2);
    (1.0 + r / s) / (q1 * q2) - r * b / (q1 * s * s) - r * a / (q2 * s * s)
        + 2.0 * r * a * b / (s * s * s)
}

/// Accept-reject sampler for `F_r`.
///
/// The density is dominated by `(1 + r/2) p(x1) p(x2) + 2r/(x1 + x2)³` where
/// `p` is the unit Pareto density. The envelope has total mass `1 + r`; its
/// second component is sampled through the sum `x1 + x2` (inverse CDF) and a
/// uniform split.
pub fn sample_fr_with<R: Rng + ?Sized>(rng: &mut R, r: f64, n: usize) -> Vec<(f64, f64)> {
    let independent_weight = (1.0 + 0.5 * r) / (1.0 + r);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (x1, x2) = if rng.random::<f64>() < independent_weight {
            (pareto(rng), pareto(rng))
        } else {
            let root = rng.random::<f64>().sqrt();
            let excess = 2.0 * root / (1.0 - root);
            let split = rng.random::<f64>();
            (1.0 + split * excess, 1.0 + (1.0 - split) * excess)
        };
        if !(x1.is_finite() && x2.is_finite()) {
            continue;
        }
        let s = x1 + x2;
        let envelope = (1.0 + 0.5 * r) / (x1 * x1 * x2 * x2) + 2.0 * r / (s * s * s);
        if rng.random::<f64>() * envelope <= fr_density(x1, x2, r) {
            out.push((x1, x2));
        }
    }
    out
}

pub fn sample_fr(config: &FrConfig) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(sample_fr_with(&mut rng, config.r, config.n))
}

fn pareto<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 / (1.0 - rng.random::<f64>())
}

/// `H_r(w) = (1 - r)/2 + r w` on `[0, 1)`, 1 at `w = 1`.
pub fn hr_cdf(w: f64, r: f64) -> f64 {
    if w < 0.0 {
        0.0
    } else if w >= 1.0 {
        1.0
    } else {
        0.5 * (1.0 - r) + r * w
    }
}

pub fn hr_density(_w: f64, r: f64) -> f64 {
    r
}

/// `H_r` as a [`SpectralDistribution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HrMeasure {
    pub r: f64,
}

impl HrMeasure {
    pub fn new(r: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r) {
            return invalid(format!("r = {r} outside [0, 1]"));
        }
        Ok(Self { r })
    }

    /// Normalised interior part (uniform for every `r > 0`).
    pub fn continuous_part(&self) -> UniformCdf {
        UniformCdf
    }
}

impl SpectralDistribution for HrMeasure {
    fn cdf(&self, w: f64) -> f64 {
        hr_cdf(w, self.r)
    }

    fn atom_at_zero(&self) -> f64 {
        0.5 * (1.0 - self.r)
    }

    fn atom_at_one(&self) -> f64 {
        0.5 * (1.0 - self.r)
    }

    fn density(&self, w: f64) -> f64 {
        if w > 0.0 && w < 1.0 {
            self.r
        } else {
            0.0
        }
    }

    fn interior_moment(&self, a: f64, b: f64, kind: MomentKind) -> f64 {
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b <= a {
            return 0.0;
        }
        let first = 0.5 * self.r * (b * b - a * a);
        match kind {
            MomentKind::W => first,
            MomentKind::OneMinusW => self.r * (b - a) - first,
        }
    }
}
