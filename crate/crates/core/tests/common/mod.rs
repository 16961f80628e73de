#![allow(dead_code)]

use bvtail::quadrature::GaussLegendre;
use bvtail::spectral::{SpectralDistribution, SpectralParams};
use bvtail::tail::{censored_density, joint_cdf, CensoredObservation, MarginParams};
use rand::Rng;

/// Valid `θ` with `m ≤ max_m`: sorted uniforms squeezed affinely onto the mean
/// constraint.
pub fn random_theta<R: Rng>(rng: &mut R, max_m: usize) -> SpectralParams {
    let m = rng.random_range(1..=max_m);
    let h0 = 0.5 * rng.random::<f64>();
    let h1 = 0.5 * rng.random::<f64>();
    theta_with(rng, m, h0, h1)
}

pub fn theta_with<R: Rng>(rng: &mut R, m: usize, h0: f64, h1: f64) -> SpectralParams {
    let target = (0.5 - h1) / (1.0 - h0 - h1);
    let mut raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    raw.sort_by(f64::total_cmp);
    let mean = raw.iter().sum::<f64>() / m as f64;
    let mut k = 1.0f64;
    if mean > raw[0] {
        k = k.min(target / (mean - raw[0]));
    }
    if raw[m - 1] > mean {
        k = k.min((1.0 - target) / (raw[m - 1] - mean));
    }
    k *= 0.999;
    let ys = raw.iter().map(|y| target + k * (y - mean)).collect();
    SpectralParams::new(h0, h1, ys).expect("generated θ is valid")
}

pub fn random_margin<R: Rng>(rng: &mut R, u: f64) -> MarginParams {
    MarginParams::new(
        rng.random_range(-0.4..0.6),
        rng.random_range(0.03..0.3),
        rng.random_range(0.5..3.0),
        u,
    )
    .unwrap()
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Richardson-extrapolated central difference.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

/// Richardson-extrapolated mixed second difference.
pub fn mixed_derivative(f: impl Fn(f64, f64) -> f64, x: f64, y: f64, h: f64, k: f64) -> f64 {
    let d = |h: f64, k: f64| {
        (f(x + h, y + k) - f(x + h, y - k) - f(x - h, y + k) + f(x - h, y - k)) / (4.0 * h * k)
    };
    (4.0 * d(h / 2.0, k / 2.0) - d(h, k)) / 3.0
}

/// Mixed finite difference of the model CDF at a point with both
/// coordinates exceeding, next to the analytic censored density.
pub fn branch11_vs_fd<H: SpectralDistribution>(
    h: &H,
    m1: &MarginParams,
    m2: &MarginParams,
    x1: f64,
    x2: f64,
) -> (f64, f64) {
    let obs = CensoredObservation::censor(x1, x2, m1.u, m2.u);
    let analytic = censored_density(&obs, h, m1, m2).unwrap();
    let f = |a: f64, b: f64| joint_cdf(a, b, h, m1, m2).unwrap();
    let fd = mixed_derivative(f, x1, x2, 1e-3 * m1.sigma, 1e-3 * m2.sigma);
    (analytic, fd)
}

/// Integral over `[x(p_lo), x(1 - 1e-8)]` of a function of `x`, done in the
/// variable `v = -ln(1 - F(x))` so that heavy tails stay well resolved.
fn tail_integral(m: &MarginParams, mut g: impl FnMut(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(8);
    let p_lo = m.cdf(m.u).unwrap();
    let (v_lo, v_hi) = (-(1.0 - p_lo).ln(), -(1e-8f64).ln());
    rule.integrate_composite(v_lo, v_hi, 96, |v| {
        let p = 1.0 - (-v).exp();
        let x = m.quantile(p).unwrap();
        let f = m.density(x).unwrap();
        if f <= 0.0 {
            0.0
        } else {
            g(x) * (1.0 - p) / f
        }
    })
}

/// `F(u1, u2)` plus the integrals of the three exceedance branches of the
/// censored density over the quadrant.
pub fn partition_total<H: SpectralDistribution>(
    h: &H,
    m1: &MarginParams,
    m2: &MarginParams,
) -> f64 {
    let (u1, u2) = (m1.u, m2.u);
    let dens = |x1: f64, x2: f64| {
        censored_density(&CensoredObservation::censor(x1, x2, u1, u2), h, m1, m2).unwrap()
    };
    let corner = dens(u1 - 1.0, u2 - 1.0);
    let only_first = tail_integral(m1, |x1| dens(x1, u2 - 1.0));
    let only_second = tail_integral(m2, |x2| dens(u1 - 1.0, x2));
    let both = tail_integral(m1, |x1| tail_integral(m2, |x2| dens(x1, x2)));
    corner + only_first + only_second + both
}

/// Hit-or-miss estimate of the `(m-1)`-dimensional surface measure of
/// `{0 < y_1 < … < y_m < 1 : Σ y = c}`, from sorted uniforms for the first
/// `m - 1` coordinates. Returns `(estimate, standard error)`.
pub fn slice_hit_or_miss<R: Rng>(rng: &mut R, m: usize, c: f64, draws: usize) -> (f64, f64) {
    if m == 1 {
        return (if c > 0.0 && c < 1.0 { 1.0 } else { 0.0 }, 0.0);
    }
    let mut hits = 0usize;
    let mut buf = vec![0.0; m - 1];
    for _ in 0..draws {
        if slice_hit(rng, &mut buf, c) {
            hits += 1;
        }
    }
    let factor = (m as f64).sqrt() / factorial(m - 1);
    let p = hits as f64 / draws as f64;
    (factor * p, factor * (p * (1.0 - p) / draws as f64).sqrt())
}

pub fn slice_hit<R: Rng>(rng: &mut R, buf: &mut [f64], c: f64) -> bool {
    for v in buf.iter_mut() {
        *v = rng.random::<f64>();
    }
    buf.sort_by(f64::total_cmp);
    let last = c - buf.iter().sum::<f64>();
    last < 1.0 && buf.last().is_none_or(|top| last > *top)
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Monte Carlo surface measure of the whole parameter surface for model `m`:
/// `(h0, h1)` uniform on `[0, 1/2]²` and a hit-or-miss draw of the slice.
pub fn normalizer_hit_or_miss<R: Rng>(rng: &mut R, m: usize, draws: usize) -> (f64, f64) {
    let mut buf = vec![0.0; m - 1];
    let mut hits = 0usize;
    for _ in 0..draws {
        let h0 = 0.5 * rng.random::<f64>();
        let h1 = 0.5 * rng.random::<f64>();
        let c = m as f64 * (0.5 - h1) / (1.0 - h0 - h1);
        if slice_hit(rng, &mut buf, c) {
            hits += 1;
        }
    }
    let factor = 0.25 * (m as f64).sqrt() / factorial(m - 1);
    let p = hits as f64 / draws as f64;
    (factor * p, factor * (p * (1.0 - p) / draws as f64).sqrt())
}
