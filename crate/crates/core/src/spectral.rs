//! Spectral measures on `[0, 1]` with mean one half: the parameter surface,
//! the discrete approximation step, and the spline-smoothed family used as the
//! model space.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::GaussLegendre;
use crate::spline::{MonotoneSpline, PiecewiseCubic};

/// Minimum gap between consecutive interior atoms.
pub const MIN_ATOM_GAP: f64 = 1e-12;
/// Tolerance on the mean constraint when validating parameters.
pub const MEAN_TOLERANCE: f64 = 1e-9;

/// Which first moment of the interior part to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `∫ w H(dw)`
    W,
    /// `∫ (1 - w) H(dw)`
    OneMinusW,
}

/// A probability measure on `[0, 1]` split into atoms at the end points and an
/// interior part.
pub trait SpectralDistribution {
    /// `H([0, w])`; 0 below the unit interval and 1 from `w = 1` on.
    fn cdf(&self, w: f64) -> f64;
    fn atom_at_zero(&self) -> f64;
    fn atom_at_one(&self) -> f64;
    /// Lebesgue density of the interior part at `w ∈ (0, 1)`.
    fn density(&self, w: f64) -> f64;
    /// Moment of the interior part over `[a, b) ∩ (0, 1)`.
    fn interior_moment(&self, a: f64, b: f64, kind: MomentKind) -> f64;

    /// `∫ w H(dw)` over the whole interval.
    fn mean(&self) -> f64 {
        self.atom_at_one() + self.interior_moment(0.0, 1.0, MomentKind::W)
    }
}

/// Point `θ = (h0, y_1, ..., y_m, h1)` on the constrained parameter surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    h0: f64,
    h1: f64,
    ys: Vec<f64>,
}

impl SpectralParams {
    pub fn new(h0: f64, h1: f64, ys: Vec<f64>) -> Result<Self> {
        if !(0.0..=0.5).contains(&h0) || !(0.0..=0.5).contains(&h1) {
            return invalid(format!("atom masses ({h0}, {h1}) outside [0, 1/2]"));
        }
        if h0 == 0.5 && h1 == 0.5 {
            if !ys.is_empty() {
                return invalid("the Bernoulli(1/2) point carries no interior atoms");
            }
            return Ok(Self { h0, h1, ys });
        }
        if ys.is_empty() {
            return invalid("at least one interior atom is required");
        }
        if ys.iter().any(|y| !(*y > 0.0 && *y < 1.0)) {
            return invalid("interior atoms must lie in (0, 1)");
        }
        if ys.windows(2).any(|w| w[1] - w[0] < MIN_ATOM_GAP) {
            return invalid("interior atoms must be strictly increasing");
        }
        let target = (0.5 - h1) / (1.0 - h0 - h1);
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        if (mean - target).abs() > MEAN_TOLERANCE {
            return invalid(format!(
                "interior atoms average {mean}, the constraint requires {target}"
            ));
        }
        Ok(Self { h0, h1, ys })
    }

    /// The two-atom measure `(δ₀ + δ₁)/2`.
    pub fn bernoulli() -> Self {
        Self {
            h0: 0.5,
            h1: 0.5,
            ys: Vec::new(),
        }
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn h1(&self) -> f64 {
        self.h1
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn m(&self) -> usize {
        self.ys.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.h0 == 0.5 && self.h1 == 0.5
    }

    /// Mass shared by the interior atoms, `1 - h0 - h1`.
    pub fn interior_mass(&self) -> f64 {
        1.0 - self.h0 - self.h1
    }

    /// Required average `ȳ` of the interior atoms.
    pub fn target_mean(&self) -> f64 {
        if self.is_degenerate() {
            return 0.5;
        }
        (0.5 - self.h1) / (1.0 - self.h0 - self.h1)
    }

    /// The discrete measure with equal masses on the interior atoms.
    pub fn step_measure(&self) -> DiscreteSpectral {
        let each = self.interior_mass() / self.m().max(1) as f64;
        DiscreteSpectral {
            atom0: self.h0,
            atom1: self.h1,
            interior: self.ys.iter().map(|y| (*y, each)).collect(),
        }
    }
}

/// Finite discrete spectral measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpectral {
    atom0: f64,
    atom1: f64,
    interior: Vec<(f64, f64)>,
}

impl DiscreteSpectral {
    /// Builds the measure from `(location, mass)` pairs in `[0, 1]`.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let mut atom0 = 0.0;
        let mut atom1 = 0.0;
        let mut interior = Vec::new();
        for (w, p) in atoms {
            if !(0.0..=1.0).contains(&w) || p.is_nan() || p < 0.0 {
                return invalid(format!("bad atom ({w}, {p})"));
            }
            if w == 0.0 {
                atom0 += p;
            } else if w == 1.0 {
                atom1 += p;
            } else {
                interior.push((w, p));
            }
        }
        interior.sort_by(|a, b| a.0.total_cmp(&b.0));
        let out = Self {
            atom0,
            atom1,
            interior,
        };
        let total = out.atom0 + out.atom1 + out.interior.iter().map(|a| a.1).sum::<f64>();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("atom masses sum to {total}"));
        }
        if (out.mean() - 0.5).abs() > 1e-12 {
            return invalid(format!("mean {} differs from 1/2", out.mean()));
        }
        Ok(out)
    }

    pub fn interior_atoms(&self) -> &[(f64, f64)] {
        &self.interior
    }
}

impl SpectralDistribution for DiscreteSpectral {
    fn cdf(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        if w >= 1.0 {
            return 1.0;
        }
        self.atom0
            + self
                .interior
                .iter()
                .take_while(|(y, _)| *y <= w)
                .map(|a| a.1)
                .sum::<f64>()
    }

    fn atom_at_zero(&self) -> f64 {
        self.atom0
    }

    fn atom_at_one(&self) -> f64 {
        self.atom1
    }

    fn density(&self, _w: f64) -> f64 {
        0.0
    }

    fn interior_moment(&self, a: f64, b: f64, kind: MomentKind) -> f64 {
        self.interior
            .iter()
            .filter(|(y, _)| *y >= a && *y < b)
            .map(|(y, p)| match kind {
                MomentKind::W => y * p,
                MomentKind::OneMinusW => (1.0 - y) * p,
            })
            .sum()
    }
}

/// Lower and upper monotone cubic splines bracketing the step function of
/// `θ`'s discrete measure.
///
/// Both use the knots `0, y_1, ..., y_m, 1` and are flat on `[0, y_1]` and
/// `[y_m, 1)`.
pub fn build_bracketing_splines(
    theta: &SpectralParams,
) -> Result<(MonotoneSpline, MonotoneSpline)> {
    if theta.is_degenerate() {
        return invalid("the Bernoulli(1/2) point has no spline representation");
    }
    let m = theta.m();
    let step = theta.interior_mass() / m as f64;
    let mut knots = Vec::with_capacity(m + 2);
    knots.push(0.0);
    knots.extend_from_slice(theta.ys());
    knots.push(1.0);
    let ordinates = |offset: usize| -> Vec<f64> {
        let mut v = Vec::with_capacity(m + 2);
        let first = theta.h0() + step * offset as f64;
        v.push(first);
        v.extend((0..m).map(|i| theta.h0() + step * (i + offset) as f64));
        v.push(theta.h0() + step * (m - 1 + offset) as f64);
        v
    };
    let lower = MonotoneSpline::new(knots.clone(), ordinates(0))?;
    let upper = MonotoneSpline::new(knots, ordinates(1))?;
    Ok((lower, upper))
}

// Measures are built once per proposal and read many times; boxing buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
enum Body {
    Bernoulli,
    Smooth {
        lower: MonotoneSpline,
        upper: MonotoneSpline,
        alpha: f64,
        mix: PiecewiseCubic,
    },
}

/// Smooth spectral measure `H_θ = α H₋ + (1 - α) H₊`, or the two-atom
/// Bernoulli(1/2) measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atom0: f64,
    atom1: f64,
    body: Body,
}

impl SpectralMeasure {
    pub fn build(theta: &SpectralParams) -> Result<Self> {
        if theta.is_degenerate() {
            return Ok(Self::bernoulli());
        }
        let (lower, upper) = build_bracketing_splines(theta)?;
        let a_lower = lower.integral(0.0, 1.0);
        let a_upper = upper.integral(0.0, 1.0);
        if a_upper.is_nan() || a_lower.is_nan() || a_upper <= a_lower {
            return Err(Error::Invariant(format!(
                "bracketing integrals coincide ({a_lower}, {a_upper})"
            )));
        }
        let alpha = ((a_upper - 0.5) / (a_upper - a_lower)).clamp(0.0, 1.0);
        let mix = PiecewiseCubic::blend(lower.curve(), upper.curve(), alpha)?;
        Ok(Self {
            atom0: mix.start_value(),
            atom1: 1.0 - mix.end_value(),
            body: Body::Smooth {
                lower,
                upper,
                alpha,
                mix,
            },
        })
    }

    pub fn bernoulli() -> Self {
        Self {
            atom0: 0.5,
            atom1: 0.5,
            body: Body::Bernoulli,
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match &self.body {
            Body::Smooth { alpha, .. } => Some(*alpha),
            Body::Bernoulli => None,
        }
    }

    pub fn lower(&self) -> Option<&MonotoneSpline> {
        match &self.body {
            Body::Smooth { lower, .. } => Some(lower),
            Body::Bernoulli => None,
        }
    }

    pub fn upper(&self) -> Option<&MonotoneSpline> {
        match &self.body {
            Body::Smooth { upper, .. } => Some(upper),
            Body::Bernoulli => None,
        }
    }

    /// `H(w)`, rejecting arguments outside `[0, 1]`.
    pub fn try_cdf(&self, w: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&w) {
            return invalid(format!("w = {w} outside [0, 1]"));
        }
        Ok(self.cdf(w))
    }

    /// `h(w)`, rejecting arguments outside `(0, 1)`.
    pub fn try_density(&self, w: f64) -> Result<f64> {
        if !(w > 0.0 && w < 1.0) {
            return invalid(format!("w = {w} outside (0, 1)"));
        }
        Ok(self.density(w))
    }

    /// Interior moment over `[a, b]` with `0 <= a <= b <= 1`.
    pub fn partial_moment(&self, a: f64, b: f64, kind: MomentKind) -> Result<f64> {
        if !(0.0 <= a && a <= b && b <= 1.0) {
            return invalid(format!(
                "moment bounds [{a}, {b}] not ordered inside [0, 1]"
            ));
        }
        Ok(self.interior_moment(a, b, kind))
    }

    /// `1 - ∫₀¹ H(w) dw`, computed from the spline antiderivatives.
    pub fn mean_from_cdf(&self) -> f64 {
        match &self.body {
            Body::Bernoulli => 0.5,
            Body::Smooth { mix, .. } => 1.0 - mix.integral(0.0, 1.0),
        }
    }
}

impl SpectralDistribution for SpectralMeasure {
    fn cdf(&self, w: f64) -> f64 {
        if w < 0.0 {
            return 0.0;
        }
        if w >= 1.0 {
            return 1.0;
        }
        match &self.body {
            Body::Bernoulli => 0.5,
            Body::Smooth { mix, .. } => mix.value(w),
        }
    }

    fn atom_at_zero(&self) -> f64 {
        self.atom0
    }

    fn atom_at_one(&self) -> f64 {
        self.atom1
    }

    fn density(&self, w: f64) -> f64 {
        match &self.body {
            Body::Bernoulli => 0.0,
            Body::Smooth { mix, .. } => {
                if w <= 0.0 || w >= 1.0 {
                    0.0
                } else {
                    mix.derivative(w).max(0.0)
                }
            }
        }
    }

    fn interior_moment(&self, a: f64, b: f64, kind: MomentKind) -> f64 {
        let Body::Smooth { mix, .. } = &self.body else {
            return 0.0;
        };
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        if b <= a {
            return 0.0;
        }
        let first = mix.moment_to(b) - mix.moment_to(a);
        match kind {
            MomentKind::W => first,
            MomentKind::OneMinusW => (mix.value(b) - mix.value(a)) - first,
        }
    }
}

/// Distribution function on `[0, 1]` fed to [`discrete_approximation`].
pub trait UnitCdf {
    fn cdf(&self, w: f64) -> f64;

    /// `∫_a^b Φ(w) dw`; the default uses adaptive Gauss–Legendre.
    fn integral(&self, a: f64, b: f64) -> f64 {
        adaptive_integral(&|w| self.cdf(w), a, b)
    }

    /// Closed-form generalised inverse, when available.
    fn quantile(&self, _p: f64) -> Option<f64> {
        None
    }
}

/// Adapter turning a closure into a [`UnitCdf`].
pub struct FnCdf<F>(pub F);

impl<F: Fn(f64) -> f64> UnitCdf for FnCdf<F> {
    fn cdf(&self, w: f64) -> f64 {
        (self.0)(w)
    }
}

/// The uniform distribution function `Φ(w) = w`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformCdf;

impl UnitCdf for UniformCdf {
    fn cdf(&self, w: f64) -> f64 {
        w.clamp(0.0, 1.0)
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.clamp(0.0, 1.0), b.clamp(0.0, 1.0));
        0.5 * (b * b - a * a)
    }

    fn quantile(&self, p: f64) -> Option<f64> {
        Some(p.clamp(0.0, 1.0))
    }
}

fn adaptive_integral(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    thread_local! {
        static RULE: GaussLegendre = GaussLegendre::new(10);
    }
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        rule: &GaussLegendre,
        a: f64,
        b: f64,
        whole: f64,
        depth: u32,
    ) -> f64 {
        let mid = 0.5 * (a + b);
        let left = rule.integrate(a, mid, f);
        let right = rule.integrate(mid, b, f);
        if depth == 0 || (left + right - whole).abs() <= 1e-14 * (b - a).max(1e-300) {
            return left + right;
        }
        recurse(f, rule, a, mid, left, depth - 1) + recurse(f, rule, mid, b, right, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    RULE.with(|rule| {
        let whole = rule.integrate(a, b, f);
        recurse(f, rule, a, b, whole, 30)
    })
}

fn generalized_inverse(cdf: &dyn UnitCdf, p: f64) -> f64 {
    if let Some(q) = cdf.quantile(p) {
        return q;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if cdf.cdf(0.0) >= p {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    // keep cdf(lo) < p <= cdf(hi)
    for _ in 0..200 {
        if hi - lo <= 1e-15 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cdf.cdf(mid) >= p {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Locations of `m` equally weighted atoms whose uniform distribution has the
/// same mean as `cdf` and lies within `1/m` of it in sup-norm.
///
/// Atom `i` lies in `[q_{i-1}, q_i]` where `q_i` is the `i/m` quantile.
pub fn discrete_approximation(cdf: &dyn UnitCdf, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return invalid("m must be at least 1");
    }
    const PROBE: usize = 1024;
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=PROBE {
        let v = cdf.cdf(k as f64 / PROBE as f64);
        if !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return invalid(format!("cdf value {v} outside [0, 1]"));
        }
        if v < prev - 1e-12 {
            return invalid("cdf is not monotone");
        }
        prev = v;
    }
    if (prev - 1.0).abs() > 1e-12 {
        return invalid(format!("cdf(1) = {prev}, expected 1"));
    }
    let mf = m as f64;
    let quantiles: Vec<f64> = (0..=m)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                generalized_inverse(cdf, i as f64 / mf)
            }
        })
        .collect();
    Ok((1..=m)
        .map(|i| {
            let (lo, hi) = (quantiles[i - 1], quantiles[i]);
            let excess = cdf.integral(lo, hi) - (i as f64 - 1.0) / mf * (hi - lo);
            (hi - mf * excess).clamp(lo, hi)
        })
        .collect())
}

/// Discrete approximant of `H = h0 δ₀ + (1 - h0 - h1) Φ + h1 δ₁` as a point on
/// the parameter surface.
///
/// The interior atoms are shifted by the (rounding-level) difference between
/// their mean and the constraint so that the result validates.
pub fn approximate_spectral(
    h0: f64,
    h1: f64,
    continuous: &dyn UnitCdf,
    m: usize,
) -> Result<SpectralParams> {
    if h0 == 0.5 && h1 == 0.5 {
        return Ok(SpectralParams::bernoulli());
    }
    let mut ys = discrete_approximation(continuous, m)?;
    let target = (0.5 - h1) / (1.0 - h0 - h1);
    let mean = ys.iter().sum::<f64>() / m as f64;
    if (mean - target).abs() > MEAN_TOLERANCE {
        return invalid(format!(
            "continuous part has mean {mean}, the atoms require {target}"
        ));
    }
    for y in &mut ys {
        *y += target - mean;
    }
    SpectralParams::new(h0, h1, ys)
}

/// Plot-ready record of a spectral measure evaluated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurveRecord {
    pub m: usize,
    pub h0: f64,
    pub h1: f64,
    pub ys: Vec<f64>,
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl SpectralCurveRecord {
    pub fn evaluate(theta: &SpectralParams, grid: &[f64]) -> Result<Self> {
        let measure = SpectralMeasure::build(theta)?;
        Ok(Self {
            m: theta.m(),
            h0: theta.h0(),
            h1: theta.h1(),
            ys: theta.ys().to_vec(),
            grid: grid.to_vec(),
            cdf: grid.iter().map(|w| measure.cdf(*w)).collect(),
        })
    }
}

/// Largest `|F(w) - G(w)|` over the grid.
pub fn sup_distance(
    f: &dyn SpectralDistribution,
    g: &dyn SpectralDistribution,
    grid: &[f64],
) -> f64 {
    grid.iter()
        .map(|w| (f.cdf(*w) - g.cdf(*w)).abs())
        .fold(0.0, f64::max)
}

/// `n + 1` equally spaced points on `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(h0: f64, h1: f64, ys: &[f64]) -> SpectralParams {
        SpectralParams::new(h0, h1, ys.to_vec()).unwrap()
    }

    #[test]
    fn validation_rules() {
        assert!(SpectralParams::new(0.1, 0.1, vec![0.25, 0.75]).is_ok());
        assert!(SpectralParams::new(0.1, 0.1, vec![0.75, 0.25]).is_err());
        assert!(SpectralParams::new(0.1, 0.1, vec![0.5, 0.5]).is_err());
        assert!(SpectralParams::new(0.1, 0.1, vec![0.3, 0.6]).is_err());
        assert!(SpectralParams::new(0.6, 0.1, vec![0.5]).is_err());
        assert!(SpectralParams::new(0.0, 0.0, vec![0.0, 1.0]).is_err());
        assert!(SpectralParams::new(0.5, 0.5, vec![]).is_ok());
        assert!(SpectralParams::new(0.5, 0.5, vec![0.5]).is_err());
        assert!(SpectralParams::new(0.2, 0.2, vec![]).is_err());
        // h0 = 1/2 alone forces ȳ = 1, which no interior atom can meet
        assert!(SpectralParams::new(0.5, 0.2, vec![0.99]).is_err());
    }

    #[test]
    fn uniform_m2_atoms() {
        let t = discrete_approximation(&UniformCdf, 2).unwrap();
        assert!((t[0] - 0.25).abs() < 1e-15 && (t[1] - 0.75).abs() < 1e-15);
        // same via the generic bisection/quadrature path
        let t = discrete_approximation(&FnCdf(|w: f64| w.clamp(0.0, 1.0)), 2).unwrap();
        assert!((t[0] - 0.25).abs() < 1e-12 && (t[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn point_mass_single_atom() {
        let cdf = FnCdf(|w: f64| if w >= 0.5 { 1.0 } else { 0.0 });
        let t = discrete_approximation(&cdf, 1).unwrap();
        assert!((t[0] - 0.5).abs() < 1e-12, "{t:?}");
    }

    #[test]
    fn rejects_invalid_cdfs() {
        assert!(discrete_approximation(&FnCdf(|w: f64| 1.0 - w), 3).is_err());
        assert!(discrete_approximation(&FnCdf(|w: f64| 2.0 * w), 3).is_err());
        assert!(discrete_approximation(&FnCdf(|w: f64| 0.5 * w), 3).is_err());
        assert!(discrete_approximation(&UniformCdf, 0).is_err());
    }

    #[test]
    fn bracket_ordinates_m2() {
        let (lo, up) = build_bracketing_splines(&params(0.0, 0.0, &[0.25, 0.75])).unwrap();
        assert_eq!(lo.value(0.25), 0.0);
        assert_eq!(lo.value(0.75), 0.5);
        assert_eq!(up.value(0.25), 0.5);
        assert_eq!(up.value(0.75), 1.0);
        // flat outside [y1, ym]
        assert_eq!(lo.value(0.1), 0.0);
        assert_eq!(up.value(0.9), 1.0);
    }

    #[test]
    fn single_atom_bracket_is_full_width() {
        let (lo, up) = build_bracketing_splines(&params(0.0, 0.0, &[0.5])).unwrap();
        for k in 0..100 {
            let w = k as f64 / 100.0;
            assert_eq!(lo.value(w), 0.0);
            assert_eq!(up.value(w), 1.0);
        }
        let h = SpectralMeasure::build(&params(0.0, 0.0, &[0.5])).unwrap();
        assert_eq!(h.alpha(), Some(0.5));
        assert_eq!(h.atom_at_zero(), 0.5);
        assert_eq!(h.atom_at_one(), 0.5);
    }

    #[test]
    fn symmetric_theta_gives_half_alpha() {
        let h = SpectralMeasure::build(&params(0.1, 0.1, &[0.2, 0.45, 0.55, 0.8])).unwrap();
        assert!((h.alpha().unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn degenerate_is_bernoulli() {
        let h = SpectralMeasure::build(&SpectralParams::bernoulli()).unwrap();
        assert_eq!(h.atom_at_zero(), 0.5);
        assert_eq!(h.atom_at_one(), 0.5);
        assert_eq!(h.cdf(0.5), 0.5);
        assert_eq!(h.cdf(0.0), 0.5);
        assert_eq!(h.cdf(1.0), 1.0);
        assert_eq!(h.density(0.3), 0.0);
        assert!(build_bracketing_splines(&SpectralParams::bernoulli()).is_err());
    }

    #[test]
    fn mean_is_half_for_m2() {
        let h = SpectralMeasure::build(&params(0.0, 0.0, &[0.25, 0.75])).unwrap();
        assert!((h.mean() - 0.5).abs() < 1e-10);
        assert!((h.mean_from_cdf() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn checked_accessors_reject_out_of_domain() {
        let h = SpectralMeasure::build(&params(0.0, 0.0, &[0.25, 0.75])).unwrap();
        assert!(h.try_cdf(-0.1).is_err());
        assert!(h.try_cdf(1.1).is_err());
        assert!(h.try_density(0.0).is_err());
        assert!(h.try_density(1.0).is_err());
        assert!(h.partial_moment(0.6, 0.4, MomentKind::W).is_err());
        assert!(h.try_cdf(1.0).is_ok());
    }

    #[test]
    fn curve_record_round_trips() {
        let theta = params(0.1, 0.2, &[0.3, 0.6 / 0.7 - 0.3]);
        let rec = SpectralCurveRecord::evaluate(&theta, &unit_grid(4)).unwrap();
        let text = serde_json::to_string(&rec).unwrap();
        assert!(text.contains("\"ys\"") && text.contains("\"cdf\""));
        let back: SpectralCurveRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rec);
        assert_eq!(rec.cdf[4], 1.0);
    }
}
