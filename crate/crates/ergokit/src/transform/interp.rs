//! Monotone cubic interpolation tables (Fritsch–Carlson tangents).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A strictly increasing (x, y) table with monotonicity-preserving cubic
/// interpolation. Queries outside the table extend linearly with the
/// boundary tangent; callers are told when that happens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tangents: Vec<f64>,
}

impl NumericTable {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::Precondition(
                "numeric table needs at least two equal-length columns".into(),
            ));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Precondition("numeric table has non-finite entries".into()));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) || !ys.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Precondition(
                "numeric table must be strictly increasing in both coordinates".into(),
            ));
        }
        let tangents = fritsch_carlson_tangents(&xs, &ys);
        Ok(NumericTable { xs, ys, tangents })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Interpolated value and whether linear extrapolation was used.
    pub fn eval(&self, x: f64) -> (f64, bool) {
        let n = self.xs.len();
        if x < self.xs[0] {
            return (self.ys[0] + self.tangents[0] * (x - self.xs[0]), true);
        }
        if x > self.xs[n - 1] {
            return (
                self.ys[n - 1] + self.tangents[n - 1] * (x - self.xs[n - 1]),
                true,
            );
        }
        // Index of the segment containing x.
        let hi = self.xs.partition_point(|&g| g < x).min(n - 1).max(1);
        let lo = hi - 1;
        let h = self.xs[hi] - self.xs[lo];
        let s = (x - self.xs[lo]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let y = h00 * self.ys[lo]
            + h10 * h * self.tangents[lo]
            + h01 * self.ys[hi]
            + h11 * h * self.tangents[hi];
        (y, false)
    }
}

/// Tangents from the Fritsch–Carlson scheme: a weighted harmonic mean of
/// adjacent secants, which keeps the cubic inside the monotone region.
/// Endpoints use the three-point rule, clamped to preserve shape.
fn fritsch_carlson_tangents(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = ys
        .windows(2)
        .zip(h.iter())
        .map(|(w, &hk)| (w[1] - w[0]) / hk)
        .collect();
    let mut m = vec![0.0; n];
    if n == 2 {
        m[0] = d[0];
        m[1] = d[0];
        return m;
    }
    m[0] = endpoint_tangent(h[0], h[1], d[0], d[1]);
    m[n - 1] = endpoint_tangent(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    for k in 1..n - 1 {
        if d[k - 1] * d[k] <= 0.0 {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    m
}

fn endpoint_tangent(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}
