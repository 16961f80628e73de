//! Monotone piecewise-cubic interpolation with Fritsch–Carlson endpoint
//! derivatives, plus exact integrals of the resulting curves.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Endpoint derivatives for a monotone cubic interpolant.
///
/// The first and last derivatives are zero. An interior derivative is the
/// weighted harmonic mean of the neighbouring secant slopes when both have the
/// same strict sign, and zero otherwise.
pub fn fritsch_carlson_derivatives(knots: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    check_nodes(knots, values)?;
    let n = knots.len();
    let spacing: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let slopes: Vec<f64> = values
        .windows(2)
        .zip(&spacing)
        .map(|(v, h)| (v[1] - v[0]) / h)
        .collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (prev, next) = (slopes[i - 1], slopes[i]);
        if prev * next > 0.0 {
            let a = (1.0 + spacing[i] / (spacing[i - 1] + spacing[i])) / 3.0;
            d[i] = prev * next / (a * next + (1.0 - a) * prev);
        }
    }
    Ok(d)
}

fn check_nodes(knots: &[f64], values: &[f64]) -> Result<()> {
    if knots.len() != values.len() {
        return invalid(format!("{} knots but {} values", knots.len(), values.len()));
    }
    if knots.len() < 2 {
        return invalid("a spline needs at least two knots");
    }
    if knots.iter().chain(values).any(|v| !v.is_finite()) {
        return invalid("non-finite knot or value");
    }
    if knots.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("knots must be strictly increasing");
    }
    if values.windows(2).any(|w| w[1] < w[0]) {
        return invalid("values must be nondecreasing");
    }
    Ok(())
}

/// A C¹ piecewise cubic on `[knots[0], knots[last]]`, flat outside.
///
/// Piece `i` is `c0 + c1 s + c2 s² + c3 s³` with `s = x - knots[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCubic {
    knots: Vec<f64>,
    coeffs: Vec<[f64; 4]>,
    end_value: f64,
    // running integrals from knots[0] to knots[i]
    cum_integral: Vec<f64>,
    cum_moment: Vec<f64>,
}

impl PiecewiseCubic {
    fn from_coeffs(knots: Vec<f64>, coeffs: Vec<[f64; 4]>, end_value: f64) -> Self {
        let mut cum_integral = Vec::with_capacity(knots.len());
        let mut cum_moment = Vec::with_capacity(knots.len());
        let (mut ci, mut cm) = (0.0, 0.0);
        cum_integral.push(0.0);
        cum_moment.push(0.0);
        for (i, c) in coeffs.iter().enumerate() {
            let h = knots[i + 1] - knots[i];
            ci += piece_integral(c, h);
            cm += piece_moment(c, knots[i], h);
            cum_integral.push(ci);
            cum_moment.push(cm);
        }
        Self {
            knots,
            coeffs,
            end_value,
            cum_integral,
            cum_moment,
        }
    }

    /// Convex combination `weight * a + (1 - weight) * b` of two curves on the
    /// same knots.
    pub fn blend(a: &Self, b: &Self, weight: f64) -> Result<Self> {
        if a.knots != b.knots {
            return invalid("blended curves must share their knots");
        }
        let coeffs = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(ca, cb)| {
                let mut c = [0.0; 4];
                for k in 0..4 {
                    c[k] = weight * ca[k] + (1.0 - weight) * cb[k];
                }
                c
            })
            .collect();
        let end = weight * a.end_value + (1.0 - weight) * b.end_value;
        Ok(Self::from_coeffs(a.knots.clone(), coeffs, end))
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn start_value(&self) -> f64 {
        self.coeffs[0][0]
    }

    pub fn end_value(&self) -> f64 {
        self.end_value
    }

    // piece index and local offset, clamped to the domain
    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let n = self.knots.len();
        if x.is_nan() || x >= self.knots[n - 1] {
            return None;
        }
        let x = x.max(self.knots[0]);
        let i = self.knots.partition_point(|k| *k <= x).saturating_sub(1);
        let i = i.min(n - 2);
        Some((i, x - self.knots[i]))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.locate(x) {
            Some((i, s)) => {
                let c = &self.coeffs[i];
                c[0] + s * (c[1] + s * (c[2] + s * c[3]))
            }
            None => self.end_value,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x < self.knots[0] || x > self.knots[self.knots.len() - 1] {
            return 0.0;
        }
        let n = self.knots.len();
        let (i, s) = if x >= self.knots[n - 1] {
            (n - 2, self.knots[n - 1] - self.knots[n - 2])
        } else {
            self.locate(x).expect("inside the domain")
        };
        let c = &self.coeffs[i];
        c[1] + s * (2.0 * c[2] + s * 3.0 * c[3])
    }

    fn cumulative(&self, x: f64, table: &[f64], piece: impl Fn(&[f64; 4], f64, f64) -> f64) -> f64 {
        let n = self.knots.len();
        if x <= self.knots[0] {
            return 0.0;
        }
        if x >= self.knots[n - 1] {
            return table[n - 1];
        }
        let (i, s) = self.locate(x).expect("inside the domain");
        table[i] + piece(&self.coeffs[i], self.knots[i], s)
    }

    /// Exact `∫_{knots[0]}^{x} φ(w) dw` for `x` inside the domain.
    pub fn integral_to(&self, x: f64) -> f64 {
        self.cumulative(x, &self.cum_integral, |c, _, s| piece_integral(c, s))
    }

    /// Exact `∫_a^b φ(w) dw` restricted to the domain.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.integral_to(b) - self.integral_to(a)
    }

    /// Exact `∫_{knots[0]}^{x} w φ'(w) dw`.
    pub fn moment_to(&self, x: f64) -> f64 {
        self.cumulative(x, &self.cum_moment, piece_moment)
    }
}

// ∫_0^s of the piece polynomial
fn piece_integral(c: &[f64; 4], s: f64) -> f64 {
    s * (c[0] + s * (c[1] / 2.0 + s * (c[2] / 3.0 + s * c[3] / 4.0)))
}

// ∫_0^s (x0 + t) φ'(x0 + t) dt with φ' = c1 + 2 c2 t + 3 c3 t²
fn piece_moment(c: &[f64; 4], x0: f64, s: f64) -> f64 {
    let mass = s * (c[1] + s * (c[2] + s * c[3]));
    let first = s * s * (c[1] / 2.0 + s * (2.0 * c[2] / 3.0 + s * 3.0 * c[3] / 4.0));
    x0 * mass + first
}

/// Monotone cubic interpolant through `(knots, values)` using
/// [`fritsch_carlson_derivatives`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSpline {
    values: Vec<f64>,
    derivs: Vec<f64>,
    curve: PiecewiseCubic,
}

impl MonotoneSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let derivs = fritsch_carlson_derivatives(&knots, &values)?;
        Self::with_derivatives(knots, values, derivs)
    }

    /// Hermite cubic with caller-supplied endpoint derivatives.
    pub fn with_derivatives(knots: Vec<f64>, values: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        check_nodes(&knots, &values)?;
        if derivs.len() != knots.len() || derivs.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return invalid("endpoint derivatives must be finite, nonnegative, one per knot");
        }
        let coeffs = (0..knots.len() - 1)
            .map(|i| {
                let h = knots[i + 1] - knots[i];
                let slope = (values[i + 1] - values[i]) / h;
                let (d0, d1) = (derivs[i], derivs[i + 1]);
                [
                    values[i],
                    d0,
                    (3.0 * slope - 2.0 * d0 - d1) / h,
                    (d0 + d1 - 2.0 * slope) / (h * h),
                ]
            })
            .collect();
        let end = *values.last().expect("at least two values");
        let curve = PiecewiseCubic::from_coeffs(knots, coeffs, end);
        Ok(Self {
            values,
            derivs,
            curve,
        })
    }

    pub fn knots(&self) -> &[f64] {
        self.curve.knots()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> &[f64] {
        &self.derivs
    }

    pub fn curve(&self) -> &PiecewiseCubic {
        &self.curve
    }

    pub fn value(&self, x: f64) -> f64 {
        self.curve.value(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.curve.derivative(x)
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.curve.integral(a, b)
    }
}
