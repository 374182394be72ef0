//! The strong stable direction and its integral curves.
//!
//! With `Gamma(xi, x, y) = sigma(xi) / f'_x(y)` and `A = (d f / d x) / f'`,
//! the field `X3 = -sum_k Gamma^k A o f^k` satisfies `X3 = -A + Gamma X3 o f`.
//! Strong stable fibres are graphs `u -> l(u)` over the `x` coordinate
//! solving `l'(u) = X3(xi, u, l(u))`.

use rayon::prelude::*;

use crate::baker::{random_digits, BakerSystem};
use crate::error::{Error, Result};
use crate::fibre::{compose_along, FibreBounds, FibreFamily};
use crate::grid::Interval;
use crate::rng::stream;

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-4;

pub struct StableField<'a, F: ?Sized> {
    fam: &'a F,
    sys: BakerSystem,
    i: Interval,
    j: Interval,
    pub bounds: FibreBounds,
    pub truncation: usize,
    pub tail_bound: f64,
    /// `sup |X3|` measured on a grid and inflated by 5%.
    pub slope_bound: f64,
    /// `sup |A| / (1 - |Gamma|)`, valid for every point.
    pub analytic_slope_bound: f64,
}

impl<'a, F: FibreFamily + ?Sized> StableField<'a, F> {
    /// Field with the shortest truncation whose tail bound is below
    /// `tail_target`.
    pub fn new(fam: &'a F, sys: &BakerSystem, i: Interval, j: Interval, tail_target: f64) -> Result<Self> {
        let bounds = FibreBounds::measure(fam, sys, j, 400)?;
        let g = bounds.gamma_norm;
        if !(g < 1.0) {
            return Err(Error::HypothesisFailed(format!("stable cocycle norm {g} is not below 1")));
        }
        let n = if bounds.sup_a == 0.0 {
            1
        } else {
            ((tail_target * (1.0 - g) / bounds.sup_a).ln() / g.ln()).ceil().max(1.0) as usize
        };
        Self::build(fam, sys, i, j, bounds, n)
    }

    pub fn with_truncation(fam: &'a F, sys: &BakerSystem, i: Interval, j: Interval, n: usize) -> Result<Self> {
        let bounds = FibreBounds::measure(fam, sys, j, 400)?;
        if !(bounds.gamma_norm < 1.0) {
            return Err(Error::HypothesisFailed(format!("stable cocycle norm {} is not below 1", bounds.gamma_norm)));
        }
        Self::build(fam, sys, i, j, bounds, n.max(1))
    }

    fn build(fam: &'a F, sys: &BakerSystem, i: Interval, j: Interval, bounds: FibreBounds, n: usize) -> Result<Self> {
        if i.lo < j.lo || i.hi > j.hi {
            return Err(Error::InvalidParameter("I must lie inside J".into()));
        }
        let mut field = StableField {
            fam,
            sys: *sys,
            i,
            j,
            bounds,
            truncation: n,
            tail_bound: 0.0,
            slope_bound: 0.0,
            analytic_slope_bound: bounds.sup_a / (1.0 - bounds.gamma_norm),
        };
        field.tail_bound = field.tail_bound_for(n);
        field.slope_bound = field.measure_slope_bound()?;
        Ok(field)
    }

    pub fn tail_bound_for(&self, n: usize) -> f64 {
        self.bounds.gamma_norm.powi(n as i32) * self.bounds.sup_a / (1.0 - self.bounds.gamma_norm)
    }

    pub fn system(&self) -> &BakerSystem {
        &self.sys
    }

    pub fn family(&self) -> &F {
        self.fam
    }

    pub fn j(&self) -> Interval {
        self.j
    }

    pub fn eps0(&self) -> f64 {
        (self.i.lo - self.j.lo).min(self.j.hi - self.i.hi)
    }

    /// Guaranteed half-width of a fibre's domain around its anchor.
    pub fn delta(&self) -> f64 {
        if self.slope_bound == 0.0 {
            f64::INFINITY
        } else {
            self.eps0() / self.slope_bound
        }
    }

    fn measure_slope_bound(&self) -> Result<f64> {
        const XI: usize = 32;
        const NODES: usize = 48;
        let need = self.truncation;
        let max = (0..XI)
            .into_par_iter()
            .map(|m| {
                let xi0 = (m as f64 + 0.5) / XI as f64;
                let mut digits = self.sys.digits_of(xi0, 8);
                digits.extend(random_digits(self.sys.split(), need, &mut stream(0x5107e, m as u64)));
                let mut best = 0.0f64;
                for a in 0..=NODES {
                    for b in 0..=NODES {
                        let x = a as f64 / NODES as f64;
                        let y = self.j.lo + self.j.width() * b as f64 / NODES as f64;
                        best = best.max(self.x3(&digits, x, y)?.abs());
                    }
                }
                Ok(best)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(1.05 * max)
    }

    /// `X3` truncated at the field's `N`; `xi` holds at least `N` digits.
    pub fn x3(&self, xi: &[u8], x: f64, y: f64) -> Result<f64> {
        self.x3_terms(xi, x, y, self.truncation)
    }

    pub fn x3_terms(&self, xi: &[u8], x: f64, y: f64, n: usize) -> Result<f64> {
        if xi.len() < n {
            return Err(Error::InvalidParameter(format!("X3 with {n} terms needs {n} digits of xi, have {}", xi.len())));
        }
        if !self.j.contains(y) {
            return Err(Error::FibreEscape { step: 0, y, lo: self.j.lo, hi: self.j.hi });
        }
        let (mut x, mut y) = (x, y);
        let (mut gk, mut sum) = (1.0, 0.0);
        for (k, &d) in xi[..n].iter().enumerate() {
            let fy = self.fam.dy(x, y);
            sum += gk * self.fam.dx(x, y) / fy;
            gk *= self.sys.slope_of_digit(d) / fy;
            y = self.fam.value(x, y);
            if !self.j.contains(y) {
                return Err(Error::FibreEscape { step: k + 1, y, lo: self.j.lo, hi: self.j.hi });
            }
            x = self.sys.inverse_branch(d, x);
        }
        Ok(-sum)
    }

    pub fn gamma(&self, xi_digit: u8, x: f64, y: f64) -> f64 {
        self.sys.slope_of_digit(xi_digit) / self.fam.dy(x, y)
    }

    pub fn a_term(&self, x: f64, y: f64) -> f64 {
        self.fam.dx(x, y) / self.fam.dy(x, y)
    }
}

/// A strong stable fibre sampled on a uniform grid of step `h`.
#[derive(Clone, Debug)]
pub struct StableFibre {
    pub xi_digits: Vec<u8>,
    pub x_anchor: f64,
    pub y_anchor: f64,
    pub us: Vec<f64>,
    pub ells: Vec<f64>,
    /// `X3` along the samples, i.e. `l'(u)`.
    pub slopes: Vec<f64>,
    pub h: f64,
    pub truncation: usize,
    pub domain_full: bool,
}

impl StableFibre {
    pub fn domain(&self) -> Interval {
        Interval { lo: self.us[0], hi: *self.us.last().expect("fibre has samples") }
    }

    /// Cubic Hermite interpolation; `None` outside the domain.
    pub fn eval(&self, u: f64) -> Option<f64> {
        let d = self.domain();
        if u < d.lo || u > d.hi {
            return None;
        }
        let k = self.us.partition_point(|&v| v <= u).clamp(1, self.us.len().max(2) - 1);
        if self.us.len() == 1 {
            return Some(self.ells[0]);
        }
        let (u0, u1) = (self.us[k - 1], self.us[k]);
        let w = u1 - u0;
        let t = (u - u0) / w;
        let (h00, h10, h01, h11) =
            (2.0 * t.powi(3) - 3.0 * t * t + 1.0, t.powi(3) - 2.0 * t * t + t, -2.0 * t.powi(3) + 3.0 * t * t, t.powi(3) - t * t);
        Some(h00 * self.ells[k - 1] + h10 * w * self.slopes[k - 1] + h01 * self.ells[k] + h11 * w * self.slopes[k])
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut csv::Writer<W>, sys: &BakerSystem) -> Result<()> {
        let xi = sys.value_of_digits(&self.xi_digits[..self.xi_digits.len().min(64)]);
        for (u, l) in self.us.iter().zip(&self.ells) {
            w.write_record([xi.to_string(), self.x_anchor.to_string(), self.y_anchor.to_string(), u.to_string(), l.to_string()])?;
        }
        Ok(())
    }
}

pub const FIBRE_CSV_HEADER: [&str; 5] = ["xi", "x_anchor", "y_anchor", "u", "ell_u"];

/// Integrate the fibre through `(xi, x, y)` over `[0, 1]`.
pub fn integrate_fibre<F: FibreFamily + ?Sized>(
    field: &StableField<'_, F>,
    xi: &[u8],
    x: f64,
    y: f64,
    h: f64,
) -> Result<StableFibre> {
    integrate_fibre_on(field, xi, x, y, h, Interval { lo: 0.0, hi: 1.0 })
}

/// Integrate the fibre through `(xi, x, y)` with the classical fourth-order
/// Runge-Kutta scheme, left and right from `x`, stopping at the ends of
/// `window` or just before the solution would leave `J`.
pub fn integrate_fibre_on<F: FibreFamily + ?Sized>(
    field: &StableField<'_, F>,
    xi: &[u8],
    x: f64,
    y: f64,
    h: f64,
    window: Interval,
) -> Result<StableFibre> {
    if !(h > 0.0 && h <= 1e-3) {
        return Err(Error::InvalidParameter(format!("step h={h} must lie in (0, 1e-3]")));
    }
    if !window.contains(x) {
        return Err(Error::InvalidParameter(format!("anchor x={x} outside window [{}, {}]", window.lo, window.hi)));
    }
    let s0 = field.x3(xi, x, y)?;
    let right = march(field, xi, x, y, h, window.hi);
    let left = march(field, xi, x, y, -h, window.lo);

    let mut us = Vec::with_capacity(left.len() + right.len() + 1);
    let mut ells = Vec::with_capacity(us.capacity());
    let mut slopes = Vec::with_capacity(us.capacity());
    for &(u, l, s) in left.iter().rev() {
        us.push(u);
        ells.push(l);
        slopes.push(s);
    }
    us.push(x);
    ells.push(y);
    slopes.push(s0);
    for &(u, l, s) in &right {
        us.push(u);
        ells.push(l);
        slopes.push(s);
    }
    let fibre = StableFibre {
        xi_digits: xi.to_vec(),
        x_anchor: x,
        y_anchor: y,
        domain_full: us[0] == window.lo && *us.last().unwrap() == window.hi,
        us,
        ells,
        slopes,
        h,
        truncation: field.truncation,
    };
    if field.i.contains(y) {
        let delta = field.delta();
        let need = Interval { lo: (x - delta).max(window.lo), hi: (x + delta).min(window.hi) };
        let d = fibre.domain();
        // the guaranteed neighbourhood is open; allow one step of slack at its ends
        if d.lo > need.lo + h || d.hi < need.hi - h {
            return Err(Error::FibreDomain { lo: d.lo, hi: d.hi, need_lo: need.lo, need_hi: need.hi });
        }
    }
    Ok(fibre)
}

fn march<F: FibreFamily + ?Sized>(
    field: &StableField<'_, F>,
    xi: &[u8],
    x: f64,
    y: f64,
    h: f64,
    end: f64,
) -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    let (mut u, mut l) = (x, y);
    let j = field.j;
    loop {
        let remaining = end - u;
        if remaining == 0.0 || remaining.signum() != h.signum() {
            break;
        }
        let step = if remaining.abs() <= h.abs() { remaining } else { h };
        let stage = |uu: f64, ll: f64| field.x3(xi, uu, ll).ok();
        let Some(k1) = stage(u, l) else { break };
        let Some(k2) = stage(u + 0.5 * step, l + 0.5 * step * k1) else { break };
        let Some(k3) = stage(u + 0.5 * step, l + 0.5 * step * k2) else { break };
        let Some(k4) = stage(u + step, l + step * k3) else { break };
        let ln = l + step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if !j.contains(ln) {
            break;
        }
        let un = if step == remaining { end } else { u + step };
        let Some(sn) = stage(un, ln) else { break };
        out.push((un, ln, sn));
        u = un;
        l = ln;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equivariance {
    /// Largest `|f^n(l(u)) - l_n(pi_n(u))|` over compared samples.
    pub residual: f64,
    /// `L max(a, 1 - a)^n |domain|`.
    pub envelope: f64,
    /// Integration error estimate propagated through `n` steps.
    pub budget: f64,
    pub compared: usize,
    /// Samples whose image fell outside the domain of `l_n`.
    pub excluded: usize,
}

/// Compare `f^n` of the fibre with the fibre integrated through the image of
/// its anchor.
pub fn equivariance_residual<F: FibreFamily + ?Sized>(
    field: &StableField<'_, F>,
    fibre: &StableFibre,
    n: usize,
    samples: usize,
) -> Result<Equivariance> {
    let sys = field.sys;
    let d = fibre.domain();
    if n == 0 {
        return Ok(Equivariance { residual: 0.0, envelope: field.slope_bound * d.width(), budget: 0.0, compared: samples, excluded: 0 });
    }
    let xi = &fibre.xi_digits;
    if xi.len() < n + field.truncation {
        return Err(Error::InvalidParameter(format!("need {} digits of xi", n + field.truncation)));
    }
    let image_x = |u: f64| xi[..n].iter().fold(u, |x, &dg| sys.inverse_branch(dg, x));
    let xn = image_x(fibre.x_anchor);
    let yn = compose_along(field.fam, &sys, fibre.x_anchor, &xi[..n], fibre.y_anchor, None)?.y;
    let window = Interval { lo: image_x(d.lo), hi: image_x(d.hi) };
    let ln = integrate_fibre_on(field, &xi[n..], xn, yn, fibre.h, window)?;
    let coarse = integrate_fibre_on(field, xi, fibre.x_anchor, fibre.y_anchor, (2.0 * fibre.h).min(1e-3), d)?;
    let coarse_n = integrate_fibre_on(field, &xi[n..], xn, yn, (2.0 * fibre.h).min(1e-3), window)?;

    let samples = samples.max(2);
    let (mut residual, mut e1, mut e2, mut compared, mut excluded) = (0.0f64, 0.0f64, 0.0f64, 0, 0);
    for s in 0..samples {
        let u = d.lo + d.width() * s as f64 / (samples - 1) as f64;
        let (Some(l), Some(lc)) = (fibre.eval(u), coarse.eval(u)) else {
            excluded += 1;
            continue;
        };
        let un = image_x(u);
        let (Some(r), Some(rc)) = (ln.eval(un), coarse_n.eval(un)) else {
            excluded += 1;
            continue;
        };
        let left = compose_along(field.fam, &sys, u, &xi[..n], l, None)?.y;
        residual = residual.max((left - r).abs());
        e1 = e1.max((l - lc).abs());
        e2 = e2.max((r - rc).abs());
        compared += 1;
    }
    let budget = field.bounds.max_slope.powi(n as i32) * e1 + e2 + 1e-12;
    Ok(Equivariance {
        residual,
        envelope: field.slope_bound * sys.max_contraction().powi(n as i32) * d.width(),
        budget,
        compared,
        excluded,
    })
}
