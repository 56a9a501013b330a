//! Piecewise-linear cumulative distributions with jumps.

use serde::Serialize;

use super::histogram::SizeHistogram;
use crate::error::{Error, Result};

/// A CDF given by strictly increasing support points. At each point the CDF
/// jumps from `left[i]` (its left limit) to `value[i]`; between consecutive
/// points it is linear from `value[i]` to `left[i + 1]`. It is 0 below the
/// first point and `value[last] = 1` from the last point on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCdf {
    points: Vec<f64>,
    left: Vec<f64>,
    value: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// CDF values at the support points.
    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn eval(&self, s: f64) -> f64 {
        let n = self.points.len();
        if s < self.points[0] {
            return 0.0;
        }
        if s >= self.points[n - 1] {
            return self.value[n - 1];
        }
        // last point <= s
        let i = self.points.partition_point(|&p| p <= s) - 1;
        if s == self.points[i] {
            return self.value[i];
        }
        let (x0, x1) = (self.points[i], self.points[i + 1]);
        let t = (s - x0) / (x1 - x0);
        self.value[i] + t * (self.left[i + 1] - self.value[i])
    }

    /// Generalized inverse: the smallest `s` with `F(s) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.points.len();
        let u = u.clamp(0.0, 1.0);
        let i = self.value.partition_point(|&v| v < u).min(n - 1);
        if u >= self.left[i] || i == 0 {
            return self.points[i];
        }
        let (v0, l1) = (self.value[i - 1], self.left[i]);
        let (x0, x1) = (self.points[i - 1], self.points[i]);
        let t = (u - v0) / (l1 - v0);
        (x0 + t * (x1 - x0)).clamp(x0, x1)
    }
}

/// CDF through the sorted sizes: the i-th smallest of n sizes (0-based) maps
/// to `i / (n - 1)`, linear in between, so `F(min) = 0` and `F(max) = 1`.
/// Repeated sizes become a jump spanning their ranks.
pub fn empirical_cdf(sizes: &[f64]) -> Result<EmpiricalCdf> {
    if sizes.is_empty() {
        return Err(Error::EmptyInput("empirical_cdf: no sizes"));
    }
    if sizes.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("non-finite size".into()));
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n == 1 {
        return Ok(EmpiricalCdf {
            points: vec![sorted[0]],
            left: vec![0.0],
            value: vec![1.0],
        });
    }
    let denom = (n - 1) as f64;
    let mut points = Vec::new();
    let mut left = Vec::new();
    let mut value = Vec::new();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == v {
            j += 1;
        }
        points.push(v);
        // a repeated minimum is a jump from zero
        left.push(if i == 0 { 0.0 } else { i as f64 / denom });
        value.push(j as f64 / denom);
        i = j + 1;
    }
    let last = value.len() - 1;
    value[last] = 1.0;
    if points.len() == 1 {
        left[0] = 0.0;
    }
    Ok(EmpiricalCdf { points, left, value })
}

/// CDF of a histogram with each bin's mass spread uniformly over its range.
/// Zero-width bins become jumps.
pub fn histogram_cdf(h: &SizeHistogram) -> EmpiricalCdf {
    let bins = h.bins();
    let probs = h.probs();
    let mut points = vec![bins[0].low];
    let mut left = vec![0.0];
    let mut value = vec![0.0];
    let mut cum = 0.0;
    for (bin, &p) in bins.iter().zip(probs) {
        cum += p;
        let last = points.len() - 1;
        if bin.high > points[last] {
            points.push(bin.high);
            left.push(cum);
            value.push(cum);
        } else {
            // zero width: the mass is a jump at the current point
            value[last] = cum;
        }
    }
    let last = value.len() - 1;
    value[last] = 1.0;
    left[last] = left[last].min(1.0);
    EmpiricalCdf { points, left, value }
}
