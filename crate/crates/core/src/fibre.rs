//! Fibre maps `y -> f_x(y)`: evaluation, derivatives, inverses, fixed points
//! and compositions along base orbits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::baker::{BakerSystem, SymbolSeq};
use crate::error::{Error, Result};
use crate::grid::{padded_extrema, Interval};

/// Default number of cells in the sign-change scan of `fixed_points`.
pub const FIXED_POINT_CELLS: usize = 10_000;

/// A family of increasing interval maps indexed by `x` in the circle.
///
/// Implementors supply the partial derivatives up to the orders used by the
/// stable-fibre field and the curvature checks.
pub trait FibreFamily: Send + Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn dy(&self, x: f64, y: f64) -> f64;
    fn dyy(&self, x: f64, y: f64) -> f64;
    fn dyyy(&self, x: f64, y: f64) -> f64;
    fn dx(&self, x: f64, y: f64) -> f64;
    fn dxx(&self, x: f64, y: f64) -> f64;
    fn dxy(&self, x: f64, y: f64) -> f64;

    fn schwarzian(&self, x: f64, y: f64) -> f64 {
        let d1 = self.dy(x, y);
        let q = self.dyy(x, y) / d1;
        self.dyyy(x, y) / d1 - 1.5 * q * q
    }

    /// Solve `f_x(y) = z` for `y` in `bracket` by bisection.
    fn inverse(&self, x: f64, z: f64, bracket: Interval) -> Option<f64> {
        let (mut lo, mut hi) = (bracket.lo, bracket.hi);
        if self.value(x, lo) > z || self.value(x, hi) < z {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(x, mid) < z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// `f_x(y) = arctan(r y) + eps cos(2 pi x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArctanFamily {
    pub r: f64,
    pub eps: f64,
}

impl ArctanFamily {
    pub fn new(r: f64, eps: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite() && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("need r > 0 and finite eps, got r={r}, eps={eps}")));
        }
        Ok(ArctanFamily { r, eps })
    }
}

impl FibreFamily for ArctanFamily {
    fn value(&self, x: f64, y: f64) -> f64 {
        (self.r * y).atan() + self.eps * (2.0 * PI * x).cos()
    }

    fn dy(&self, _x: f64, y: f64) -> f64 {
        let ry = self.r * y;
        self.r / (1.0 + ry * ry)
    }

    fn dyy(&self, _x: f64, y: f64) -> f64 {
        let r = self.r;
        let s = 1.0 + r * r * y * y;
        -2.0 * r * r * r * y / (s * s)
    }

    fn dyyy(&self, _x: f64, y: f64) -> f64 {
        let r = self.r;
        let u = r * r * y * y;
        let s = 1.0 + u;
        -2.0 * r * r * r * (1.0 - 3.0 * u) / (s * s * s)
    }

    fn dx(&self, x: f64, _y: f64) -> f64 {
        -2.0 * PI * self.eps * (2.0 * PI * x).sin()
    }

    fn dxx(&self, x: f64, _y: f64) -> f64 {
        -4.0 * PI * PI * self.eps * (2.0 * PI * x).cos()
    }

    fn dxy(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }

    fn schwarzian(&self, _x: f64, y: f64) -> f64 {
        let s = 1.0 + self.r * self.r * y * y;
        -2.0 * self.r * self.r / (s * s)
    }

    fn inverse(&self, x: f64, z: f64, bracket: Interval) -> Option<f64> {
        let w = z - self.eps * (2.0 * PI * x).cos();
        if w.abs() >= 0.5 * PI {
            return None;
        }
        let y = w.tan() / self.r;
        bracket.contains(y).then_some(y)
    }
}

/// Value and derivatives of a fibre map at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivs {
    pub value: f64,
    pub dy: f64,
    pub dyy: f64,
    pub dyyy: f64,
    pub dx: f64,
    pub schwarzian: f64,
}

pub fn eval_derivs<F: FibreFamily + ?Sized>(fam: &F, x: f64, y: f64) -> Result<Derivs> {
    let dy = fam.dy(x, y);
    if !(dy > 0.0) {
        return Err(Error::NonMonotone { x, y, slope: dy });
    }
    Ok(Derivs {
        value: fam.value(x, y),
        dy,
        dyy: fam.dyy(x, y),
        dyyy: fam.dyyy(x, y),
        dx: fam.dx(x, y),
        schwarzian: fam.schwarzian(x, y),
    })
}

/// A smooth map of an interval carrying its first two derivatives.
pub trait IntervalMap {
    /// `(F(y), F'(y), F''(y))`.
    fn jet(&self, y: f64) -> (f64, f64, f64);
}

/// A single fibre map `f_x`.
pub struct FibreMap<'a, F: ?Sized> {
    pub fam: &'a F,
    pub x: f64,
}

impl<F: FibreFamily + ?Sized> IntervalMap for FibreMap<'_, F> {
    fn jet(&self, y: f64) -> (f64, f64, f64) {
        (self.fam.value(self.x, y), self.fam.dy(self.x, y), self.fam.dyy(self.x, y))
    }
}

/// `f_{xs[n-1]} o ... o f_{xs[0]}`: `xs[0]` acts first.
pub struct ComposedMap<'a, F: ?Sized> {
    pub fam: &'a F,
    pub xs: Vec<f64>,
}

impl<F: FibreFamily + ?Sized> IntervalMap for ComposedMap<'_, F> {
    fn jet(&self, y: f64) -> (f64, f64, f64) {
        let (mut v, mut d1, mut d2) = (y, 1.0, 0.0);
        for &x in &self.xs {
            let a = self.fam.dy(x, v);
            let b = self.fam.dyy(x, v);
            d2 = b * d1 * d1 + a * d2;
            d1 *= a;
            v = self.fam.value(x, v);
        }
        (v, d1, d2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    Unstable,
    Neutral,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPoint {
    pub y: f64,
    pub slope: f64,
    pub stability: Stability,
}

pub fn fixed_points<F: FibreFamily + ?Sized>(fam: &F, x: f64, bracket: Interval, tol: f64) -> Result<Vec<FixedPoint>> {
    fixed_points_of(&FibreMap { fam, x }, bracket, FIXED_POINT_CELLS, tol)
}

/// All fixed points of `map` in `bracket`.
///
/// Sign changes of `g = F - id` on a uniform scan are bisected.  Cells without
/// a sign change are cleared using `min g >= min(g_a, g_b) - K h^2 / 8` with
/// `K` bounding `|g''|`; cells that cannot be cleared are subdivided, and if
/// that fails the scan reports `RefinementNeeded` instead of guessing.
pub fn fixed_points_of<M: IntervalMap + ?Sized>(
    map: &M,
    bracket: Interval,
    cells: usize,
    tol: f64,
) -> Result<Vec<FixedPoint>> {
    let cells = cells.max(2);
    let nodes = bracket.nodes(cells);
    let jets: Vec<(f64, f64, f64)> = nodes.iter().map(|&y| map.jet(y)).collect();
    let k = 1.25 * jets.iter().fold(0.0f64, |m, j| m.max(j.2.abs())) + 1e-12;
    let gjet = |y: f64| {
        let (v, d, _) = map.jet(y);
        (v - y, d - 1.0)
    };

    let mut roots: Vec<f64> = Vec::new();
    let ends: Vec<(f64, f64)> = nodes.iter().zip(&jets).map(|(&y, j)| (j.0 - y, j.1 - 1.0)).collect();
    for (i, e) in ends.iter().enumerate() {
        if e.0 == 0.0 {
            roots.push(nodes[i]);
        }
    }
    for i in 0..cells {
        resolve_cell(&gjet, nodes[i], nodes[i + 1], ends[i], ends[i + 1], k, tol, 0, &mut roots)?;
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-10);

    Ok(roots
        .into_iter()
        .map(|y| {
            let slope = map.jet(y).1;
            let stability = if (slope - 1.0).abs() <= 1e-12 {
                Stability::Neutral
            } else if slope < 1.0 {
                Stability::Stable
            } else {
                Stability::Unstable
            };
            FixedPoint { y, slope, stability }
        })
        .collect())
}

/// `true` when `g` provably has no zero in the open cell beyond the ones
/// already recorded at its ends.  `k` bounds `|g''|`.
fn cell_is_clear(h: f64, (ga, da): (f64, f64), (gb, db): (f64, f64), k: f64) -> bool {
    match (ga == 0.0, gb == 0.0) {
        (false, false) => (ga < 0.0) == (gb < 0.0) && ga.abs().min(gb.abs()) - k * h * h / 8.0 > 0.0,
        (true, false) => da != 0.0 && (da < 0.0) == (gb < 0.0) && da.abs() > 0.5 * k * h,
        (false, true) => db != 0.0 && (db > 0.0) == (ga < 0.0) && db.abs() > 0.5 * k * h,
        (true, true) => false,
    }
}

#[allow(clippy::too_many_arguments)]
fn resolve_cell<G: Fn(f64) -> (f64, f64)>(
    g: &G,
    a: f64,
    b: f64,
    ea: (f64, f64),
    eb: (f64, f64),
    k: f64,
    tol: f64,
    depth: usize,
    roots: &mut Vec<f64>,
) -> Result<()> {
    let h = b - a;
    if ea.0 != 0.0 && eb.0 != 0.0 && (ea.0 < 0.0) != (eb.0 < 0.0) {
        // a sign change with g' bounded away from zero holds exactly one root
        let monotone = (ea.1 < 0.0) == (eb.1 < 0.0) && ea.1.abs().min(eb.1.abs()) - 0.5 * k * h > 0.0;
        if monotone || depth >= 16 {
            roots.push(bisect(&|y| g(y).0, a, b, ea.0, tol));
            return Ok(());
        }
    } else if cell_is_clear(h, ea, eb, k) {
        return Ok(());
    } else if depth >= 16 {
        return Err(Error::RefinementNeeded { near: 0.5 * (a + b) });
    }
    const SPLIT: usize = 8;
    let mut left = (a, ea);
    for s in 1..=SPLIT {
        let (y, ey) = if s == SPLIT {
            (b, eb)
        } else {
            let y = a + h * s as f64 / SPLIT as f64;
            let ey = g(y);
            if ey.0 == 0.0 {
                roots.push(y);
            }
            (y, ey)
        };
        resolve_cell(g, left.0, y, left.1, ey, k, tol, depth + 1, roots)?;
        left = (y, ey);
    }
    Ok(())
}

fn bisect<G: Fn(f64) -> f64>(g: &G, mut a: f64, mut b: f64, mut ga: f64, tol: f64) -> f64 {
    let width = tol.min(1e-12).max(f64::EPSILON);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if b - a <= width * (1.0 + m.abs()) || m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Result of composing fibre maps along a forward base orbit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitValue {
    pub y: f64,
    /// `log` of the derivative of the composition.
    pub log_derivative: f64,
}

/// `f^n_{(xi, x)}(y) = f_{x_{n-1}} o ... o f_{x_0}(y)` where `x_j` are the
/// second coordinates of `T^j(xi, x)`.
pub fn orbit_compose<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    point: &SymbolSeq,
    y: f64,
    n: usize,
    guard: Option<Interval>,
) -> Result<OrbitValue> {
    if point.future_len() < n {
        return Err(Error::InvalidParameter(format!("{n} steps need {n} digits of xi, have {}", point.future_len())));
    }
    compose_along(fam, sys, point.x(sys), &point.future()[..n], y, guard)
}

/// `orbit_compose` with the base orbit given by its start `x0` and the
/// digits of `xi`.
pub fn compose_along<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    x0: f64,
    digits: &[u8],
    y: f64,
    guard: Option<Interval>,
) -> Result<OrbitValue> {
    let (mut x, mut y, mut log_d) = (x0, y, 0.0);
    for (step, &d) in digits.iter().enumerate() {
        log_d += fam.dy(x, y).ln();
        y = fam.value(x, y);
        if let Some(gi) = guard {
            if !gi.contains(y) {
                return Err(Error::FibreEscape { step: step + 1, y, lo: gi.lo, hi: gi.hi });
            }
        }
        x = sys.inverse_branch(d, x);
    }
    Ok(OrbitValue { y, log_derivative: log_d })
}

/// Constants controlling the strong stable direction, measured on a padded
/// grid over the circle times `J`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FibreBounds {
    pub min_slope: f64,
    pub max_slope: f64,
    /// `max(a, 1 - a) / inf f_y`, the contraction of the stable cocycle.
    pub gamma_norm: f64,
    /// `sup |f_x / f_y|`.
    pub sup_a: f64,
    /// `sup |f_yy / f_y|`.
    pub c0: f64,
    /// `sup |d/dy (f_x / f_y)|`.
    pub c_prime: f64,
}

impl FibreBounds {
    pub fn measure<F: FibreFamily + ?Sized>(fam: &F, sys: &BakerSystem, j: Interval, grid: usize) -> Result<Self> {
        let circle = Interval { lo: 0.0, hi: 1.0 };
        let slope = padded_extrema(|x, y| fam.dy(x, y), circle, j, grid, grid);
        let min_slope = slope.padded_min();
        if !(min_slope > 0.0) {
            let (x, y) = slope.argmin;
            return Err(Error::NonMonotone { x, y, slope: min_slope });
        }
        let sup_a = padded_extrema(|x, y| (fam.dx(x, y) / fam.dy(x, y)).abs(), circle, j, grid, grid).padded_max();
        let c0 = padded_extrema(|x, y| (fam.dyy(x, y) / fam.dy(x, y)).abs(), circle, j, grid, grid).padded_max();
        let c_prime = padded_extrema(
            |x, y| {
                let fy = fam.dy(x, y);
                ((fam.dxy(x, y) * fy - fam.dx(x, y) * fam.dyy(x, y)) / (fy * fy)).abs()
            },
            circle,
            j,
            grid,
            grid,
        )
        .padded_max();
        Ok(FibreBounds {
            min_slope,
            max_slope: slope.padded_max(),
            gamma_norm: sys.max_contraction() / min_slope,
            sup_a,
            c0,
            c_prime,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(eps: f64) -> ArctanFamily {
        ArctanFamily::new(1.1, eps).unwrap()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let f = fam(0.07);
        let (x, y, h) = (0.31, -0.42, 1e-5);
        let fd = |g: &dyn Fn(f64) -> f64, t: f64| (g(t + h) - g(t - h)) / (2.0 * h);
        assert!((fd(&|t| f.value(x, t), y) - f.dy(x, y)).abs() < 1e-8);
        assert!((fd(&|t| f.dy(x, t), y) - f.dyy(x, y)).abs() < 1e-8);
        assert!((fd(&|t| f.dyy(x, t), y) - f.dyyy(x, y)).abs() < 1e-7);
        assert!((fd(&|t| f.value(t, y), x) - f.dx(x, y)).abs() < 1e-8);
        assert!((fd(&|t| f.dx(t, y), x) - f.dxx(x, y)).abs() < 1e-7);
    }

    #[test]
    fn closed_form_schwarzian_matches_generic() {
        let f = fam(0.02);
        for &y in &[-0.8, -0.1, 0.0, 0.33, 0.86] {
            let s = f.dyyy(0.0, y) / f.dy(0.0, y) - 1.5 * (f.dyy(0.0, y) / f.dy(0.0, y)).powi(2);
            assert!((s - f.schwarzian(0.0, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_matches_bisection() {
        let f = fam(0.05);
        let j = Interval::new(-0.86, 0.86).unwrap();
        struct Generic(ArctanFamily);
        impl FibreFamily for Generic {
            fn value(&self, x: f64, y: f64) -> f64 { self.0.value(x, y) }
            fn dy(&self, x: f64, y: f64) -> f64 { self.0.dy(x, y) }
            fn dyy(&self, x: f64, y: f64) -> f64 { self.0.dyy(x, y) }
            fn dyyy(&self, x: f64, y: f64) -> f64 { self.0.dyyy(x, y) }
            fn dx(&self, x: f64, y: f64) -> f64 { self.0.dx(x, y) }
            fn dxx(&self, x: f64, y: f64) -> f64 { self.0.dxx(x, y) }
            fn dxy(&self, x: f64, y: f64) -> f64 { self.0.dxy(x, y) }
        }
        let g = Generic(f);
        for &(x, z) in &[(0.1, 0.3), (0.7, -0.5), (0.5, 0.0)] {
            let a = f.inverse(x, z, j).unwrap();
            let b = g.inverse(x, z, j).unwrap();
            assert!((a - b).abs() < 1e-13);
            assert!((f.value(x, a) - z).abs() < 1e-14);
        }
        assert!(f.inverse(0.0, 2.0, j).is_none());
    }

    #[test]
    fn composition_jet_chain_rule() {
        let f = fam(0.04);
        let m = ComposedMap { fam: &f, xs: vec![0.2, 0.9, 0.45] };
        let (y, h) = (0.17, 1e-5);
        let (_, d1, d2) = m.jet(y);
        let fd1 = (m.jet(y + h).0 - m.jet(y - h).0) / (2.0 * h);
        let fd2 = (m.jet(y + h).1 - m.jet(y - h).1) / (2.0 * h);
        assert!((d1 - fd1).abs() < 1e-9);
        assert!((d2 - fd2).abs() < 1e-8);
    }

    #[test]
    fn monotonicity_violation_reported() {
        struct Fold;
        impl FibreFamily for Fold {
            fn value(&self, _x: f64, y: f64) -> f64 { -y }
            fn dy(&self, _x: f64, _y: f64) -> f64 { -1.0 }
            fn dyy(&self, _x: f64, _y: f64) -> f64 { 0.0 }
            fn dyyy(&self, _x: f64, _y: f64) -> f64 { 0.0 }
            fn dx(&self, _x: f64, _y: f64) -> f64 { 0.0 }
            fn dxx(&self, _x: f64, _y: f64) -> f64 { 0.0 }
            fn dxy(&self, _x: f64, _y: f64) -> f64 { 0.0 }
        }
        assert!(matches!(eval_derivs(&Fold, 0.0, 0.0), Err(Error::NonMonotone { .. })));
    }
}
