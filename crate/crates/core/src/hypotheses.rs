//! Numerical certification of the standing hypotheses on a grid.
//!
//! Checked on `[0, 1] x J`: monotonicity, negative Schwarzian, the expansion
//! condition `inf tau' f'_z(y) > 1` over both branches of `tau`, and
//! invariance `f(T^2 x J) inside I` with `I` in the interior of `J`.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baker::BakerSystem;
use crate::error::{Error, Result};
use crate::fibre::{ArctanFamily, FibreFamily};
use crate::grid::{padded_extrema, GridExtrema, Interval};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constraint {
    Nesting,
    Monotonicity,
    Schwarzian,
    Expansion,
    Invariance,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Nesting => "nesting",
            Constraint::Monotonicity => "monotonicity",
            Constraint::Schwarzian => "schwarzian",
            Constraint::Expansion => "expansion",
            Constraint::Invariance => "invariance",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisCertificate {
    pub i: Interval,
    pub j: Interval,
    /// `min(s - s', t' - t)`.
    pub eps0: f64,
    /// Padded `inf tau' f'` minus one.
    pub expansion_margin: f64,
    /// Distance of the padded image hull of `f` to the boundary of `I`.
    pub invariance_margin: f64,
    /// Padded `sup S f` over `[0, 1] x J`.
    pub schwarzian_max: f64,
    /// Padded `inf f_y` over `[0, 1] x J`.
    pub slope_min: f64,
    /// Padded hull of `f([0, 1] x J)`.
    pub image: Interval,
    pub grid: usize,
    /// Padding applied to each of expansion, image bounds, Schwarzian.
    pub padding: [f64; 3],
    /// `None` when every constraint holds, else the one with the smallest
    /// margin among those that fail.
    pub binding: Option<Constraint>,
}

impl HypothesisCertificate {
    pub fn pass(&self) -> bool {
        self.binding.is_none()
    }

    pub fn to_text(&self) -> String {
        format!(
            "verdict: {}\nbinding: {}\nI: [{}, {}]\nJ: [{}, {}]\neps0: {}\nexpansion_margin: {}\ninvariance_margin: {}\n\
             schwarzian_max: {}\nslope_min: {}\nimage: [{}, {}]\ngrid: {}\npadding_expansion: {}\npadding_image: {}\npadding_schwarzian: {}\n",
            if self.pass() { "pass" } else { "fail" },
            self.binding.map_or("none".to_string(), |c| c.to_string()),
            self.i.lo,
            self.i.hi,
            self.j.lo,
            self.j.hi,
            self.eps0,
            self.expansion_margin,
            self.invariance_margin,
            self.schwarzian_max,
            self.slope_min,
            self.image.lo,
            self.image.hi,
            self.grid,
            self.padding[0],
            self.padding[1],
            self.padding[2],
        )
    }
}

const CIRCLE: Interval = Interval { lo: 0.0, hi: 1.0 };

/// Padded hull of `f([0, 1] x J)`.
pub fn image_hull<F: FibreFamily + ?Sized>(fam: &F, j: Interval, grid: usize) -> (Interval, f64) {
    let e = padded_extrema(|x, y| fam.value(x, y), CIRCLE, j, grid, grid);
    (Interval { lo: e.padded_min(), hi: e.padded_max() }, e.pad)
}

/// Padded `inf tau'(xi) f'_z(y)` over both branches of `tau`.
fn expansion<F: FibreFamily + ?Sized>(fam: &F, sys: &BakerSystem, j: Interval, grid: usize) -> GridExtrema {
    let slope = padded_extrema(|x, y| fam.dy(x, y), CIRCLE, j, grid, grid);
    let factor = 1.0 / sys.max_contraction();
    GridExtrema {
        min: factor * slope.min,
        max: factor * slope.max,
        argmin: slope.argmin,
        argmax: slope.argmax,
        pad: factor * slope.pad,
    }
}

pub fn check_hypotheses<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    i: Interval,
    j: Interval,
    grid: usize,
) -> Result<HypothesisCertificate> {
    if grid < 100 {
        return Err(Error::InvalidParameter(format!("grid {grid} below the minimum of 100 per axis")));
    }
    if i.lo < j.lo || i.hi > j.hi || !(i.lo < i.hi) {
        return Err(Error::InvalidParameter(format!("I=[{}, {}] must lie inside J=[{}, {}]", i.lo, i.hi, j.lo, j.hi)));
    }
    let eps0 = (i.lo - j.lo).min(j.hi - i.hi);
    let slope = padded_extrema(|x, y| fam.dy(x, y), CIRCLE, j, grid, grid);
    let exp = expansion(fam, sys, j, grid);
    let schw = padded_extrema(|x, y| fam.schwarzian(x, y), CIRCLE, j, grid, grid);
    let (image, image_pad) = image_hull(fam, j, grid);

    let expansion_margin = exp.padded_min() - 1.0;
    let invariance_margin = (i.hi - image.hi).min(image.lo - i.lo);
    let margins = [
        (Constraint::Nesting, eps0),
        (Constraint::Monotonicity, slope.padded_min()),
        (Constraint::Schwarzian, -schw.padded_max()),
        (Constraint::Expansion, expansion_margin),
        (Constraint::Invariance, invariance_margin),
    ];
    let binding = margins
        .iter()
        .filter(|m| !(m.1 > 0.0))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|m| m.0);
    Ok(HypothesisCertificate {
        i,
        j,
        eps0,
        expansion_margin,
        invariance_margin,
        schwarzian_max: schw.padded_max(),
        slope_min: slope.padded_min(),
        image,
        grid,
        padding: [exp.pad, image_pad, schw.pad],
        binding,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionCell {
    pub m: f64,
    pub r: f64,
    pub pass: bool,
    pub expansion_margin: f64,
    pub invariance_margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionMap {
    pub eps: f64,
    pub cells: Vec<RegionCell>,
}

impl RegionMap {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["M", "r", "pass", "expansion_margin", "invariance_margin"])?;
        for c in &self.cells {
            w.write_record([
                c.m.to_string(),
                c.r.to_string(),
                u8::from(c.pass).to_string(),
                c.expansion_margin.to_string(),
                c.invariance_margin.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Check one `(M, r)` pair with `J = [-M, M]` and `I` chosen automatically:
/// the padded image hull inflated by 10% of the remaining slack.
pub fn check_region_point(eps: f64, m: f64, r: f64, sys: &BakerSystem, grid: usize) -> Result<RegionCell> {
    let fam = ArctanFamily::new(r, eps)?;
    let j = Interval::symmetric(m)?;
    let (image, _) = image_hull(&fam, j, grid);
    let slack = (m - image.hi).min(image.lo + m);
    if !(slack > 0.0) {
        let exp = expansion(&fam, sys, j, grid);
        return Ok(RegionCell { m, r, pass: false, expansion_margin: exp.padded_min() - 1.0, invariance_margin: slack });
    }
    let i = Interval { lo: image.lo - 0.1 * slack, hi: image.hi + 0.1 * slack };
    let cert = check_hypotheses(&fam, sys, i, j, grid)?;
    Ok(RegionCell {
        m,
        r,
        pass: cert.pass(),
        expansion_margin: cert.expansion_margin,
        invariance_margin: cert.invariance_margin,
    })
}

/// Scan `(M, r)` over a `cells x cells` grid of cell centres (M-major order).
pub fn scan_region(
    eps: f64,
    m_range: Interval,
    r_range: Interval,
    cells: usize,
    grid: usize,
    sys: &BakerSystem,
) -> Result<RegionMap> {
    if cells < 50 {
        return Err(Error::InvalidParameter(format!("region scan needs at least 50x50 cells, got {cells}")));
    }
    let center = |iv: Interval, k: usize| iv.lo + iv.width() * (k as f64 + 0.5) / cells as f64;
    let pts: Vec<(f64, f64)> =
        (0..cells).flat_map(|a| (0..cells).map(move |b| (a, b))).map(|(a, b)| (center(m_range, a), center(r_range, b))).collect();
    let out: Result<Vec<RegionCell>> = pts.par_iter().map(|&(m, r)| check_region_point(eps, m, r, sys, grid)).collect();
    Ok(RegionMap { eps, cells: out? })
}
