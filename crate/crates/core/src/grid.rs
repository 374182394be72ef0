//! Closed intervals and padded grid extrema.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("interval [{lo}, {hi}] is empty or not finite")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn symmetric(m: f64) -> Result<Self> {
        Interval::new(-m, m)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        y >= self.lo && y <= self.hi
    }

    /// `self` lies in the interior of `other`.
    pub fn inside(&self, other: &Interval) -> bool {
        self.lo > other.lo && self.hi < other.hi
    }

    /// `n + 1` equally spaced nodes including both ends.
    pub fn nodes(&self, n: usize) -> Vec<f64> {
        let h = self.width() / n as f64;
        (0..=n).map(|i| if i == n { self.hi } else { self.lo + h * i as f64 }).collect()
    }
}

/// Extrema of a function of two variables sampled on a tensor grid.
///
/// `pad` bounds how far the true extremum can sit beyond the sampled one.
/// It comes from the second-order interpolation remainder
/// `(hx^2 |g_xx| + hy^2 |g_yy|) / 8`, with the second derivatives measured
/// by second differences on the same grid and inflated by 5%.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridExtrema {
    pub min: f64,
    pub max: f64,
    pub argmin: (f64, f64),
    pub argmax: (f64, f64),
    pub pad: f64,
}

impl GridExtrema {
    pub fn padded_min(&self) -> f64 {
        self.min - self.pad
    }

    pub fn padded_max(&self) -> f64 {
        self.max + self.pad
    }
}

pub fn padded_extrema<F>(f: F, xr: Interval, yr: Interval, nx: usize, ny: usize) -> GridExtrema
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    assert!(nx >= 2 && ny >= 2, "grid needs at least two cells per axis");
    let xs = xr.nodes(nx);
    let ys = yr.nodes(ny);
    let rows: Vec<Vec<f64>> = xs.par_iter().map(|&x| ys.iter().map(|&y| f(x, y)).collect()).collect();

    struct Acc {
        min: f64,
        max: f64,
        argmin: (usize, usize),
        argmax: (usize, usize),
        d2x: f64,
        d2y: f64,
    }
    let acc = (0..rows.len())
        .into_par_iter()
        .map(|i| {
            let row = &rows[i];
            let mut a = Acc { min: f64::INFINITY, max: f64::NEG_INFINITY, argmin: (i, 0), argmax: (i, 0), d2x: 0.0, d2y: 0.0 };
            for (j, &v) in row.iter().enumerate() {
                if v < a.min {
                    a.min = v;
                    a.argmin = (i, j);
                }
                if v > a.max {
                    a.max = v;
                    a.argmax = (i, j);
                }
                if j > 0 && j + 1 < row.len() {
                    a.d2y = a.d2y.max((row[j + 1] - 2.0 * v + row[j - 1]).abs());
                }
                if i > 0 && i + 1 < rows.len() {
                    a.d2x = a.d2x.max((rows[i + 1][j] - 2.0 * v + rows[i - 1][j]).abs());
                }
            }
            a
        })
        .reduce_with(|a, b| Acc {
            min: a.min.min(b.min),
            max: a.max.max(b.max),
            argmin: if b.min < a.min { b.argmin } else { a.argmin },
            argmax: if b.max > a.max { b.argmax } else { a.argmax },
            d2x: a.d2x.max(b.d2x),
            d2y: a.d2y.max(b.d2y),
        })
        .expect("non-empty grid");
    // second differences are h^2 g'' already
    let pad = 1.05 * (acc.d2x + acc.d2y) / 8.0;
    GridExtrema {
        min: acc.min,
        max: acc.max,
        argmin: (xs[acc.argmin.0], ys[acc.argmin.1]),
        argmax: (xs[acc.argmax.0], ys[acc.argmax.1]),
        pad,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_rejects_empty() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn pad_covers_off_grid_extremum() {
        // maximum at x = 0.3 + tiny offset is between nodes
        let f = |x: f64, y: f64| -(x - 0.30137).powi(2) - (y + 0.1).powi(2);
        let e = padded_extrema(f, Interval::new(0.0, 1.0).unwrap(), Interval::new(-1.0, 1.0).unwrap(), 40, 40);
        assert!(e.padded_max() >= 0.0);
        assert!(e.max <= 0.0);
    }
}
