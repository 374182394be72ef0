//! The two-step fibre map `g(x, y) = f_x(f_{tau x}(y))` on horizontal strips.
//!
//! Invariance and contraction of `{y >= y0}` (or `{y <= -y0}`) under `g`
//! give continuity of the corresponding bounding graph; a two-step map that
//! stays below a threshold over a window of `x` bounds the size of the set
//! where the lower graph is negative.

use crate::baker::BakerSystem;
use crate::error::{Error, Result};
use crate::fibre::FibreFamily;
use crate::grid::{padded_extrema, GridExtrema, Interval};

/// `(g, g_y)` with `g = f_x o f_{tau x}`.
pub fn two_step<F: FibreFamily + ?Sized>(fam: &F, sys: &BakerSystem, x: f64, y: f64) -> (f64, f64) {
    let tx = sys.tau(x);
    let inner = fam.value(tx, y);
    (fam.value(x, inner), fam.dy(x, inner) * fam.dy(tx, y))
}

/// Padded extrema of `h(x, y)` over `x` in `window`, sampled separately on
/// each branch of `tau` so that second differences never straddle the
/// break point.
fn branchwise<H: Fn(f64, f64) -> f64 + Sync>(sys: &BakerSystem, window: Interval, yr: Interval, grid: usize, h: H) -> GridExtrema {
    let a = sys.split();
    [(0.0, a), (a, 1.0)]
        .into_iter()
        .map(|(lo, hi)| (lo.max(window.lo), hi.min(window.hi)))
        .filter(|(lo, hi)| hi > lo)
        .map(|(lo, hi)| padded_extrema(&h, Interval { lo, hi }, yr, grid, grid))
        .reduce(|p, q| GridExtrema {
            min: p.min.min(q.min),
            max: p.max.max(q.max),
            argmin: if q.min < p.min { q.argmin } else { p.argmin },
            argmax: if q.max > p.max { q.argmax } else { p.argmax },
            pad: p.pad.max(q.pad),
        })
        .expect("window meets at least one branch")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripReport {
    pub y0: f64,
    pub m: f64,
    /// Padded `min_x g(x, y0) - y0` (positive: upper strip invariant).
    pub upper_invariance: f64,
    /// Padded `-y0 - max_x g(x, -y0)` (positive: lower strip invariant).
    pub lower_invariance: f64,
    /// Padded `sup g_y` over `[0, 1] x [y0, M]`.
    pub upper_contraction: f64,
    /// Padded `sup g_y` over `[0, 1] x [-M, -y0]`.
    pub lower_contraction: f64,
}

impl StripReport {
    pub fn contraction(&self) -> f64 {
        self.upper_contraction.max(self.lower_contraction)
    }

    /// The upper graph is continuous: its strip is invariant and contracted.
    pub fn upper_continuous(&self) -> bool {
        self.upper_invariance > 0.0 && self.upper_contraction < 1.0
    }

    pub fn lower_continuous(&self) -> bool {
        self.lower_invariance > 0.0 && self.lower_contraction < 1.0
    }
}

pub fn strip_report<F: FibreFamily + ?Sized>(fam: &F, sys: &BakerSystem, y0: f64, m: f64, grid: usize) -> Result<StripReport> {
    if !(0.0 < y0 && y0 < m) {
        return Err(Error::InvalidParameter(format!("need 0 < y0 < M, got y0={y0}, M={m}")));
    }
    let all = Interval { lo: 0.0, hi: 1.0 };
    let up = Interval { lo: y0, hi: m };
    let down = Interval { lo: -m, hi: -y0 };
    let g = |x: f64, y: f64| two_step(fam, sys, x, y);
    let upper_contraction = branchwise(sys, all, up, grid, |x, y| g(x, y).1).padded_max();
    let lower_contraction = branchwise(sys, all, down, grid, |x, y| g(x, y).1).padded_max();
    let thin = |c: f64| Interval { lo: c, hi: c + 1e-9 };
    let upper_invariance = branchwise(sys, all, thin(y0), grid, |x, y| g(x, y).0).padded_min() - y0;
    let lower_invariance = -y0 - branchwise(sys, all, thin(-y0 - 1e-9), grid, |x, y| g(x, y).0).padded_max();
    Ok(StripReport { y0, m, upper_invariance, lower_invariance, upper_contraction, lower_contraction })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripBound {
    /// Padded `sup g` over `x` in the window and `y` in `[-M, threshold]`.
    pub sup_value: f64,
    pub pass: bool,
    /// Base-4 digits whose cylinders lie inside the window.
    pub digits: usize,
    /// `log(digits) / log 4`.
    pub cantor_dimension: f64,
    /// Lower bound for the dimension of `{phi- < threshold}` when `pass`.
    pub implied_bound: f64,
}

/// If `g < threshold` on `window x [-M, threshold]`, the lower graph stays
/// below `threshold` over every `x` whose odd iterates `tau^(2j+1) x` remain in
/// `window`; with `c` admissible base-4 digits that set has dimension
/// `1 + log c / log 4` in the square.
pub fn negative_strip_bound<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    threshold: f64,
    window: Interval,
    m: f64,
    grid: usize,
) -> Result<StripBound> {
    if !sys.is_doubling() {
        return Err(Error::InvalidParameter("the strip bound is implemented for a = 1/2".into()));
    }
    if !(threshold > -m) {
        return Err(Error::InvalidParameter("threshold must lie above -M".into()));
    }
    let e = branchwise(sys, window, Interval { lo: -m, hi: threshold }, grid, |x, y| two_step(fam, sys, x, y).0);
    let sup_value = e.padded_max();
    let digits = (0..4).filter(|&d| window.lo <= d as f64 / 4.0 && (d + 1) as f64 / 4.0 <= window.hi).count();
    let cantor_dimension = if digits == 0 { 0.0 } else { (digits as f64).ln() / 4f64.ln() };
    let pass = sup_value < threshold && digits > 0;
    Ok(StripBound { sup_value, pass, digits, cantor_dimension, implied_bound: if pass { 1.0 + cantor_dimension } else { 1.0 } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibre::ArctanFamily;

    #[test]
    fn two_step_derivative() {
        let fam = ArctanFamily::new(1.1, 0.02).unwrap();
        let sys = BakerSystem::doubling();
        let (x, y, h) = (0.37, 0.41, 1e-6);
        let fd = (two_step(&fam, &sys, x, y + h).0 - two_step(&fam, &sys, x, y - h).0) / (2.0 * h);
        assert!((fd - two_step(&fam, &sys, x, y).1).abs() < 1e-8);
    }

    #[test]
    fn unforced_strip_bound_passes() {
        let fam = ArctanFamily::new(1.1, 0.0).unwrap();
        let b = negative_strip_bound(&fam, &BakerSystem::doubling(), -0.1, Interval::new(0.25, 0.75).unwrap(), 0.86, 200).unwrap();
        assert!(b.pass);
        assert_eq!(b.digits, 2);
        assert!((b.cantor_dimension - 0.5).abs() < 1e-15);
    }
}
