use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly spaced sample positions `start + i·step`, `i < len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {len}")));
        }
        if !(step.is_finite() && step > 0.0) || !start.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive and finite, got start {start} step {step}"
            )));
        }
        Ok(Self { start, step, len })
    }

    /// `len` points from `start` to `end` inclusive.
    pub fn spanning(start: f64, end: f64, len: usize) -> Result<Self> {
        if len < 2 || !(end > start) {
            return Err(Error::InvalidGrid(format!(
                "cannot span [{start}, {end}] with {len} points"
            )));
        }
        Self::new(start, (end - start) / (len - 1) as f64, len)
    }

    /// Builds a grid from explicit positions, checking uniform spacing to
    /// 1e-12 relative to the grid's magnitude.
    pub fn from_positions(x: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {}", x.len())));
        }
        let n = x.len();
        let step = (x[n - 1] - x[0]) / (n - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::InvalidGrid("positions must be strictly increasing".into()));
        }
        let scale = x[0].abs().max(x[n - 1].abs()).max(step);
        for (i, &xi) in x.iter().enumerate() {
            if i > 0 && xi <= x[i - 1] {
                return Err(Error::InvalidGrid(format!("positions not increasing at index {i}")));
            }
            let expected = x[0] + i as f64 * step;
            if (xi - expected).abs() > 1e-12 * scale {
                return Err(Error::InvalidGrid(format!(
                    "non-uniform spacing at index {i}: x = {xi}, expected {expected}"
                )));
            }
        }
        Self::new(x[0], step, n)
    }

    pub fn start(&self) -> f64 {
        self.start
    }
    pub fn end(&self) -> f64 {
        self.start + (self.len - 1) as f64 * self.step
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn len(&self) -> usize {
        self.len
    }
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
    pub fn length(&self) -> f64 {
        self.end() - self.start
    }

    pub fn x(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.x(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.start && x <= self.end()
    }

    /// Cell index `i` with `x_i <= x < x_{i+1}`, clamped to the grid, and
    /// the fractional offset within that cell.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x - self.start) / self.step;
        let i = (s.floor().max(0.0) as usize).min(self.len - 2);
        (i, s - i as f64)
    }

    /// Every other point, starting from the first.
    pub fn coarsened(&self) -> Option<Self> {
        let len = (self.len + 1) / 2;
        Self::new(self.start, 2.0 * self.step, len).ok()
    }
}

/// Composite trapezoid rule on uniform samples.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => step * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

/// Central first derivative, one-sided second-order at the ends.
pub fn derivative(values: &[f64], step: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let d = (values[1] - values[0]) / step;
            out.fill(d);
        }
        return out;
    }
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * step);
    }
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * step);
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * step);
    out
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
