//! Deterministic parts of the spectral proposals.
//!
//! Each move is split into an interval (the support of its uniform draw) and
//! a map from the draw to the proposed point, so the moves can be driven with
//! chosen randomness. Returned log factors collect everything in the
//! acceptance ratio except the likelihood and the prior.
//!
//! Densities are taken with respect to `√m dh0 dh1 dy_1 ⋯ dy_{m-1}`. In those
//! coordinates cases (b) and (c) of the within-model move are translations,
//! while (a) and (d) carry the Jacobian factors returned by
//! [`within_move`].

use crate::spectral::SpectralParams;

/// Coordinate of `θ = (θ_0, …, θ_{m+1}) = (h0, y_1, …, y_m, h1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    H0,
    Y(usize),
    H1,
}

impl Coord {
    pub fn from_index(index: usize, m: usize) -> Self {
        match index {
            0 => Coord::H0,
            i if i == m + 1 => Coord::H1,
            i => Coord::Y(i - 1),
        }
    }
}

/// Open interval `(lo, hi)`; `None` when empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    fn new(lo: f64, hi: f64) -> Option<Self> {
        (hi > lo).then_some(Self { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, u: f64) -> bool {
        u > self.lo && u < self.hi
    }

    /// Point at relative position `v ∈ [0, 1)`.
    pub fn at(&self, v: f64) -> f64 {
        self.lo + v * (self.hi - self.lo)
    }
}

/// Support of the uniform draw for the pair `(a, b)` of coordinates.
pub fn within_interval(theta: &SpectralParams, a: Coord, b: Coord) -> Option<Interval> {
    let (h0, h1, ys) = (theta.h0(), theta.h1(), theta.ys());
    let m = ys.len() as f64;
    let ybar = theta.target_mean();
    match (a, b) {
        (Coord::H0, Coord::H1) => {
            // h0' ranges over [0 ∨ (1 - 1/(2ȳ)), 1/2) with ȳ held fixed
            let lo = (-h0).max((-0.5 + (1.0 - h0) * ybar) / ybar);
            Interval::new(lo, 0.5 - h0)
        }
        (Coord::H0, Coord::Y(j)) => {
            // y_j' = m ȳ(h0') - rest must stay in (0, 1)
            let rest = m * ybar - ys[j];
            let total = m * (0.5 - h1);
            let mut lo = 0.0f64;
            if rest > 0.0 {
                lo = lo.max(1.0 - h1 - total / rest);
            }
            let hi = 0.5f64.min(1.0 - h1 - total / (rest + 1.0));
            Interval::new(lo - h0, hi - h0)
        }
        (Coord::Y(i), Coord::Y(j)) => {
            Interval::new((-ys[i]).max(ys[j] - 1.0), 0.5 * (ys[j] - ys[i]))
        }
        (Coord::Y(i), Coord::H1) => {
            let lo = (-ys[i]).max(-m * ybar);
            let hi = (1.0 - ys[i]).min(-m * ybar + m / (2.0 * (1.0 - h0)));
            Interval::new(lo, hi)
        }
        _ => None,
    }
}

/// Within-model proposal for the pair `(a, b)` and draw `u`, with the log
/// Jacobian factor. `None` when the result leaves `Θ_m`.
pub fn within_move(
    theta: &SpectralParams,
    a: Coord,
    b: Coord,
    u: f64,
) -> Option<(SpectralParams, f64)> {
    let (h0, h1) = (theta.h0(), theta.h1());
    let mut ys = theta.ys().to_vec();
    let m = ys.len() as f64;
    let ybar = theta.target_mean();
    let (new_h0, new_h1, log_jac) = match (a, b) {
        (Coord::H0, Coord::H1) => {
            let h0n = h0 + u;
            let h1n = (0.5 - (1.0 - h0n) * ybar) / (1.0 - ybar);
            (h0n, h1n, ((0.5 - h0n) / (0.5 - h0)).ln())
        }
        (Coord::H0, Coord::Y(j)) => {
            let h0n = h0 + u;
            let rest = m * ybar - ys[j];
            ys[j] = m * (0.5 - h1) / (1.0 - h0n - h1) - rest;
            (h0n, h1, 0.0)
        }
        (Coord::Y(i), Coord::Y(j)) => {
            ys[i] += u;
            ys[j] -= u;
            (h0, h1, 0.0)
        }
        (Coord::Y(i), Coord::H1) => {
            ys[i] += u;
            let ybar_new = ybar + u / m;
            let h1n = (0.5 - ybar_new * (1.0 - h0)) / (1.0 - ybar_new);
            let ratio = (1.0 - h0 - h1n) / (1.0 - h0 - h1);
            (h0, h1n, 2.0 * ratio.ln())
        }
        _ => return None,
    };
    if !(0.0..0.5).contains(&new_h0) || !(0.0..0.5).contains(&new_h1) {
        return None;
    }
    ys.sort_by(f64::total_cmp);
    let proposal = SpectralParams::new(new_h0, new_h1, ys).ok()?;
    Some((proposal, log_jac))
}

/// Support `I_k` of the birth draw when the partner atom sits at `y`.
pub fn birth_interval(y: f64, ybar: f64) -> Option<Interval> {
    if y <= ybar {
        Interval::new(0.0, y.min(1.0 - ybar))
    } else {
        Interval::new((y - 1.0).max(-ybar), 0.0)
    }
}

/// Insert `ȳ + u` and move `y_k` to `y_k - u`.
pub fn birth_move(theta: &SpectralParams, k: usize, u: f64) -> Option<SpectralParams> {
    let ybar = theta.target_mean();
    let mut ys = theta.ys().to_vec();
    ys[k] -= u;
    ys.push(ybar + u);
    ys.sort_by(f64::total_cmp);
    SpectralParams::new(theta.h0(), theta.h1(), ys).ok()
}

/// Counts `(m₋, m₊)` of atoms at or below, and strictly above, `ȳ`.
pub fn split_counts(theta: &SpectralParams) -> (usize, usize) {
    let ybar = theta.target_mean();
    let above = theta.ys().iter().filter(|y| **y > ybar).count();
    (theta.m() - above, above)
}

/// Result of a death proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct Death {
    pub theta: SpectralParams,
    /// Value of the surviving partner after its shift.
    pub partner: f64,
    pub u: f64,
}

/// Remove whichever of `y_j ≤ ȳ < y_k` is closer to `ȳ` and shift the other
/// one to keep the mean. On a tie both removals give the same atoms, and the
/// partner lands on `ȳ`, where both branches of the birth interval have the
/// same length.
pub fn death_move(theta: &SpectralParams, j: usize, k: usize) -> Option<Death> {
    let ybar = theta.target_mean();
    let ys = theta.ys();
    let (below, above) = (ybar - ys[j], ys[k] - ybar);
    if below < 0.0 || above <= 0.0 {
        return None;
    }
    let u = below.min(above);
    let (removed, kept, partner) = if below <= above {
        (j, k, ys[k] - u)
    } else {
        (k, j, ys[j] + u)
    };
    let mut out: Vec<f64> = Vec::with_capacity(ys.len() - 1);
    for (idx, y) in ys.iter().enumerate() {
        if idx == removed {
            continue;
        }
        out.push(if idx == kept { partner } else { *y });
    }
    out.sort_by(f64::total_cmp);
    let theta = SpectralParams::new(theta.h0(), theta.h1(), out).ok()?;
    Some(Death { theta, partner, u })
}
