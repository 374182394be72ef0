//! Invariant graphs.
//!
//! The upper and lower graphs are limits of pullbacks of the constant graphs
//! `+M` and `-M`: along the backward base orbit `tau^j x`,
//! `phi_k(x) = f_{tau x} o f_{tau^2 x} o ... o f_{tau^k x}(M)`.
//! The middle graph depends on `xi` as well and is the limit of inverse
//! pullbacks along the forward orbit, `f_{x_0}^{-1} o ... o f_{x_{k-1}}^{-1}(y0)`.
//!
//! Grid nodes `x_i = i / N` are sampled generically: the itinerary of `x_i`
//! is kept to the resolution of the grid and continued by random digits.
//! Exact dyadic nodes would all be preimages of the fixed point `0`.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baker::{rational_digits, BakerSystem, SymbolSeq};
use crate::error::{Error, Result};
use crate::fibre::FibreFamily;
use crate::grid::Interval;
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Upper,
    Lower,
    Middle,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Upper => "upper",
            GraphKind::Lower => "lower",
            GraphKind::Middle => "middle",
        })
    }
}

impl std::str::FromStr for GraphKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(GraphKind::Upper),
            "lower" => Ok(GraphKind::Lower),
            "middle" => Ok(GraphKind::Middle),
            _ => Err(Error::InvalidParameter(format!("unknown graph kind '{s}'"))),
        }
    }
}

/// How grid nodes are turned into itineraries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sampling {
    /// Digits of `x_i` kept before the random continuation starts.
    pub resolved_digits: usize,
    pub seed: u64,
}

impl Sampling {
    pub fn for_grid(n: usize, seed: u64) -> Self {
        let bits = (n.max(2) as f64).log2().ceil() as usize;
        // the random tail starts right after the digits that vary across
        // nodes; fixed trailing zeros would bias every node the same way
        Sampling { resolved_digits: bits, seed }
    }
}

/// Where an inverse pullback left the interval `J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Escape {
    None,
    Up,
    Down,
}

#[derive(Clone, Debug)]
pub struct GraphGrid {
    pub kind: GraphKind,
    pub xs: Vec<f64>,
    /// `NaN` where a middle pullback escaped.
    pub values: Vec<f64>,
    pub depth: usize,
    /// `M` for the bounding graphs, `y0` for the middle graph.
    pub anchor: f64,
    /// Largest interpolated invariance defect.
    pub residual: f64,
    pub sampling: Sampling,
    /// Digits of `xi` for a middle graph.
    pub xi_digits: Option<Vec<u8>>,
    pub escapes: Vec<Escape>,
    /// `J`, used by the middle graph's inverse pullback.
    pub guard: Option<Interval>,
}

impl GraphGrid {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn escaped(&self) -> usize {
        self.escapes.iter().filter(|e| **e != Escape::None).count()
    }

    /// Linear interpolation.  Bounding graphs live on the circle and wrap;
    /// the middle graph is clamped at the right end.
    pub fn interp(&self, x: f64) -> f64 {
        let n = self.len();
        let t = x * n as f64;
        let i = (t.floor() as isize).clamp(0, n as isize - 1) as usize;
        let w = t - i as f64;
        let j = if i + 1 < n {
            i + 1
        } else if self.kind == GraphKind::Middle {
            return self.values[n - 1];
        } else {
            0
        };
        (1.0 - w) * self.values[i] + w * self.values[j]
    }

    /// The sample point behind node `i`.
    pub fn point(&self, sys: &BakerSystem, i: usize) -> SymbolSeq {
        let past_len = self.depth + sys.guard_len() + 2;
        let future: &[u8] = self.xi_digits.as_deref().unwrap_or(&[]);
        let mut rng = stream(self.sampling.seed, i as u64);
        SymbolSeq::with_resolved_x(sys, self.xs[i], self.sampling.resolved_digits, past_len, future, &mut rng)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "value", "kind", "k", "residual"])?;
        for (x, v) in self.xs.iter().zip(&self.values) {
            w.write_record([x.to_string(), v.to_string(), self.kind.to_string(), self.depth.to_string(), self.residual.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn pullback_from<F: FibreFamily + ?Sized>(fam: &F, orbit: &[f64], depth: usize, start: f64) -> f64 {
    (1..=depth).rev().fold(start, |y, j| fam.value(orbit[j], y))
}

/// `phi_k(x)` at one point, for the upper or lower graph.
pub fn pullback_value<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    kind: GraphKind,
    point: &SymbolSeq,
    depth: usize,
    anchor: f64,
) -> Result<f64> {
    let start = match kind {
        GraphKind::Upper => anchor,
        GraphKind::Lower => -anchor,
        GraphKind::Middle => return Err(Error::InvalidParameter("middle graph has no forward pullback".into())),
    };
    let orbit = point.backward_x_orbit(sys, depth)?;
    Ok(pullback_from(fam, &orbit, depth, start))
}

/// Pullback of `+M` (upper) or `-M` (lower) to depth `depth` on the grid
/// `x_i = i / n`.  Each value is also compared with depth `depth - 1`; a
/// pullback that moves the wrong way means `M` is not above the attractor.
pub fn pullback_graph<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    kind: GraphKind,
    n: usize,
    depth: usize,
    anchor: f64,
    sampling: Sampling,
) -> Result<GraphGrid> {
    if kind == GraphKind::Middle {
        return Err(Error::InvalidParameter("use middle_graph for the middle graph".into()));
    }
    if n < 2 || depth == 0 {
        return Err(Error::InvalidParameter("need at least two nodes and positive depth".into()));
    }
    let mut grid = GraphGrid {
        kind,
        xs: (0..n).map(|i| i as f64 / n as f64).collect(),
        values: Vec::new(),
        depth,
        anchor,
        residual: f64::NAN,
        sampling,
        xi_digits: None,
        escapes: vec![Escape::None; n],
        guard: None,
    };
    let sign = if kind == GraphKind::Upper { 1.0 } else { -1.0 };
    let values: Result<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = grid.point(sys, i);
            let orbit = p.backward_x_orbit(sys, depth)?;
            let start = sign * anchor;
            let v = pullback_from(fam, &orbit, depth, start);
            let prev = if depth > 1 { (2..=depth).rev().fold(start, |y, j| fam.value(orbit[j - 1], y)) } else { start };
            let defect = sign * (v - prev);
            if defect > 1e-12 {
                return Err(Error::AnchorInsideAttractor { x: grid.xs[i], defect });
            }
            Ok(v)
        })
        .collect();
    grid.values = values?;
    grid.residual = interpolated_residual(fam, sys, &grid, None)?;
    Ok(grid)
}

/// Inverse pullback of `y0` along the forward orbit starting at `x0` whose
/// branch digits are `digits`.
pub fn middle_value_along<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    x0: f64,
    digits: &[u8],
    y0: f64,
    j: Interval,
) -> std::result::Result<f64, Escape> {
    let mut xs = Vec::with_capacity(digits.len());
    let mut x = x0;
    for &d in digits {
        xs.push(x);
        x = sys.inverse_branch(d, x);
    }
    let mut y = y0;
    for &x in xs.iter().rev() {
        match fam.inverse(x, y, j) {
            Some(v) => y = v,
            None => {
                return Err(if y > fam.value(x, j.hi) { Escape::Up } else { Escape::Down });
            }
        }
    }
    Ok(y)
}

pub fn middle_value<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    point: &SymbolSeq,
    depth: usize,
    y0: f64,
    j: Interval,
) -> Result<std::result::Result<f64, Escape>> {
    if point.future_len() < depth {
        return Err(Error::InvalidParameter(format!("depth {depth} needs {depth} digits of xi")));
    }
    Ok(middle_value_along(fam, sys, point.x(sys), &point.future()[..depth], y0, j))
}

/// Middle graph `x -> phi*(xi, x)` for fixed `xi` given by its digits.
/// Nodes where the inverse pullback leaves `J` are `NaN` and recorded in
/// `escapes`.
pub fn middle_graph<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    xi_digits: &[u8],
    n: usize,
    depth: usize,
    y0: f64,
    j: Interval,
) -> Result<GraphGrid> {
    let mut grid = middle_grid_only(fam, sys, xi_digits, n, depth, y0, j)?;
    grid.residual = if xi_digits.len() > depth {
        interpolated_residual(fam, sys, &grid, None)?
    } else {
        f64::NAN
    };
    Ok(grid)
}

fn middle_grid_only<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    xi_digits: &[u8],
    n: usize,
    depth: usize,
    y0: f64,
    j: Interval,
) -> Result<GraphGrid> {
    if xi_digits.len() < depth {
        return Err(Error::InvalidParameter(format!("depth {depth} needs {depth} digits of xi")));
    }
    if n < 2 || depth == 0 {
        return Err(Error::InvalidParameter("need at least two nodes and positive depth".into()));
    }
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let res: Vec<std::result::Result<f64, Escape>> =
        xs.par_iter().map(|&x| middle_value_along(fam, sys, x, &xi_digits[..depth], y0, j)).collect();
    Ok(GraphGrid {
        kind: GraphKind::Middle,
        values: res.iter().map(|r| r.unwrap_or(f64::NAN)).collect(),
        escapes: res.iter().map(|r| r.err().unwrap_or(Escape::None)).collect(),
        xs,
        depth,
        anchor: y0,
        residual: f64::NAN,
        sampling: Sampling { resolved_digits: 0, seed: 0 },
        xi_digits: Some(xi_digits.to_vec()),
        guard: Some(j),
    })
}

/// Invariance defects of a computed graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvarianceResidual {
    /// Defect with the image side read off the grid by interpolation.
    pub interpolated: f64,
    /// Defect with the image side evaluated at the exact image point; this
    /// only measures convergence in the depth.
    pub pointwise: f64,
    /// Rough size of the interpolation error on the cells that were used.
    pub interpolation_bound: f64,
}

pub fn invariance_residual<F: FibreFamily + ?Sized>(fam: &F, sys: &BakerSystem, g: &GraphGrid) -> Result<InvarianceResidual> {
    let mut bound = 0.0f64;
    let interpolated = interpolated_residual(fam, sys, g, Some(&mut bound))?;
    let pointwise: Vec<f64> = match g.kind {
        GraphKind::Upper | GraphKind::Lower => (0..g.len())
            .into_par_iter()
            .map(|i| {
                let p = g.point(sys, i);
                let img = p.shifted(-1)?;
                let v = pullback_value(fam, sys, g.kind, &img, g.depth, g.anchor)?;
                Ok((g.values[i] - fam.value(sys.tau(g.xs[i]), v)).abs())
            })
            .collect::<Result<Vec<f64>>>()?,
        GraphKind::Middle => {
            let xi = g.xi_digits.as_ref().expect("middle graph keeps xi");
            let j = g.guard.expect("middle graph keeps J");
            if xi.len() <= g.depth {
                return Err(Error::InvalidParameter("middle residual needs one digit of xi beyond the depth".into()));
            }
            (0..g.len())
                .into_par_iter()
                .map(|i| {
                    if g.values[i].is_nan() {
                        return 0.0;
                    }
                    let x1 = sys.inverse_branch(xi[0], g.xs[i]);
                    match middle_value_along(fam, sys, x1, &xi[1..=g.depth], g.anchor, j) {
                        Ok(v) => (fam.value(g.xs[i], g.values[i]) - v).abs(),
                        Err(_) => 0.0,
                    }
                })
                .collect()
        }
    };
    Ok(InvarianceResidual {
        interpolated,
        pointwise: pointwise.into_iter().fold(0.0, f64::max),
        interpolation_bound: bound,
    })
}

fn interpolated_residual<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    g: &GraphGrid,
    bound: Option<&mut f64>,
) -> Result<f64> {
    let n = g.len();
    let cell_jump = |x: f64, other: &GraphGrid| {
        let t = x * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        if t == i as f64 {
            return 0.0;
        }
        let j = if i + 1 < n { i + 1 } else { 0 };
        (other.values[j] - other.values[i]).abs()
    };
    let (res, jump): (f64, f64) = match g.kind {
        GraphKind::Upper | GraphKind::Lower => (0..n)
            .map(|i| {
                let tx = sys.tau(g.xs[i]);
                ((g.values[i] - fam.value(tx, g.interp(tx))).abs(), cell_jump(tx, g))
            })
            .fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1))),
        GraphKind::Middle => {
            let xi = g.xi_digits.as_ref().expect("middle graph keeps xi");
            let j = g.guard.expect("middle graph keeps J");
            if xi.len() <= g.depth {
                return Ok(f64::NAN);
            }
            let companion = middle_grid_only(fam, sys, &xi[1..], n, g.depth, g.anchor, j)?;
            (0..n)
                .filter(|&i| !g.values[i].is_nan())
                .map(|i| {
                    let x1 = sys.inverse_branch(xi[0], g.xs[i]);
                    let c = companion.interp(x1);
                    if c.is_nan() {
                        (0.0, 0.0)
                    } else {
                        ((fam.value(g.xs[i], g.values[i]) - c).abs(), cell_jump(x1, &companion))
                    }
                })
                .fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
        }
    };
    if let Some(b) = bound {
        *b = jump;
    }
    Ok(res)
}

/// A base point probed exactly, outside the grid.
#[derive(Clone, Debug)]
pub struct Probe {
    pub label: String,
    pub point: SymbolSeq,
}

impl Probe {
    /// The rational `num / den` with its exact binary itinerary (doubling
    /// map only).
    pub fn rational(num: u64, den: u64, len: usize) -> Self {
        Probe { label: format!("{num}/{den}"), point: SymbolSeq::from_parts(&rational_digits(num, den, len), &[]) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeGap {
    pub label: String,
    pub x: f64,
    pub gap: f64,
    pub pinched: bool,
}

#[derive(Clone, Debug)]
pub struct PinchScan {
    pub gaps: Vec<f64>,
    pub pinched: Vec<bool>,
    /// Smallest gap over grid, refinement and probes.
    pub min_gap: f64,
    pub argmin: Vec<f64>,
    /// Smallest gap on the grid alone.
    pub grid_min_gap: f64,
    pub refined: Vec<(f64, f64)>,
    pub probes: Vec<ProbeGap>,
}

/// Gap `phi+ - phi-` on the common grid, refined around the smallest local
/// minima and evaluated at the given exact probes.
pub fn pinched_scan<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    upper: &GraphGrid,
    lower: &GraphGrid,
    tol: f64,
    probes: &[Probe],
) -> Result<PinchScan> {
    if upper.kind != GraphKind::Upper || lower.kind != GraphKind::Lower {
        return Err(Error::InvalidParameter("pinched_scan needs an upper and a lower graph".into()));
    }
    if upper.xs != lower.xs || upper.sampling != lower.sampling {
        return Err(Error::InvalidParameter("upper and lower graphs must share grid and sampling".into()));
    }
    let n = upper.len();
    let gaps: Vec<f64> = upper.values.iter().zip(&lower.values).map(|(u, l)| u - l).collect();
    let grid_min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);

    let mut minima: Vec<usize> =
        (0..n).filter(|&i| gaps[i] <= gaps[(i + n - 1) % n] && gaps[i] <= gaps[(i + 1) % n]).collect();
    minima.sort_by(|&a, &b| gaps[a].total_cmp(&gaps[b]));
    minima.truncate(8);

    const SUB: usize = 16;
    let h = 1.0 / n as f64;
    let resolved = upper.sampling.resolved_digits + 6;
    let past_len = upper.depth.max(lower.depth) + sys.guard_len() + 2;
    let refined: Vec<(f64, f64)> = minima
        .par_iter()
        .enumerate()
        .flat_map_iter(|(m, &i)| {
            (0..SUB).map(move |s| {
                let x = (upper.xs[i] + h * ((s as f64 + 0.5) / SUB as f64 - 0.5)).rem_euclid(1.0);
                let mut rng = stream(upper.sampling.seed ^ 0x5eed_0f_ce11, (n + m * SUB + s) as u64);
                let p = SymbolSeq::with_resolved_x(sys, x, resolved, past_len, &[], &mut rng);
                (x, p)
            })
        })
        .map(|(x, p)| {
            let u = pullback_value(fam, sys, GraphKind::Upper, &p, upper.depth, upper.anchor)?;
            let l = pullback_value(fam, sys, GraphKind::Lower, &p, lower.depth, lower.anchor)?;
            Ok((x, u - l))
        })
        .collect::<Result<Vec<_>>>()?;

    let probe_gaps: Vec<ProbeGap> = probes
        .iter()
        .map(|pr| {
            let u = pullback_value(fam, sys, GraphKind::Upper, &pr.point, upper.depth, upper.anchor)?;
            let l = pullback_value(fam, sys, GraphKind::Lower, &pr.point, lower.depth, lower.anchor)?;
            Ok(ProbeGap { label: pr.label.clone(), x: pr.point.x(sys), gap: u - l, pinched: u - l < tol })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut all: Vec<(f64, f64)> = upper.xs.iter().copied().zip(gaps.iter().copied()).collect();
    all.extend(refined.iter().copied());
    all.extend(probe_gaps.iter().map(|p| (p.x, p.gap)));
    let min_gap = all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let argmin = all.iter().filter(|p| p.1 <= min_gap + 1e-12).map(|p| p.0).collect();

    Ok(PinchScan {
        pinched: gaps.iter().map(|&g| g < tol).collect(),
        gaps,
        min_gap,
        argmin,
        grid_min_gap,
        refined,
        probes: probe_gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibre::ArctanFamily;

    fn setup(eps: f64) -> (ArctanFamily, BakerSystem) {
        (ArctanFamily::new(1.1, eps).unwrap(), BakerSystem::doubling())
    }

    #[test]
    fn unforced_graphs_are_constant() {
        let (f, s) = setup(0.0);
        let up = pullback_graph(&f, &s, GraphKind::Upper, 64, 200, 0.86, Sampling::for_grid(64, 1)).unwrap();
        let ystar = up.values[0];
        assert!(up.values.iter().all(|v| (v - ystar).abs() < 1e-12));
        assert!((ystar - (1.1 * ystar).atan()).abs() < 1e-12);
        let r = invariance_residual(&f, &s, &up).unwrap();
        assert!(r.interpolated < 1e-10 && r.pointwise < 1e-10);
    }

    #[test]
    fn anchor_inside_attractor_is_rejected() {
        let (f, s) = setup(0.1);
        let e = pullback_graph(&f, &s, GraphKind::Upper, 32, 50, 0.2, Sampling::for_grid(32, 1));
        assert!(matches!(e, Err(Error::AnchorInsideAttractor { .. })));
    }

    #[test]
    fn middle_graph_of_unforced_system_is_zero() {
        let (f, s) = setup(0.0);
        let j = Interval::new(-0.86, 0.86).unwrap();
        let xi = vec![0u8, 1, 1, 0].repeat(60);
        let g = middle_graph(&f, &s, &xi, 32, 200, 0.0, j).unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(g.escaped(), 0);
    }

    #[test]
    fn pullback_point_matches_explicit_composition() {
        let (f, s) = setup(0.04);
        let p = Probe::rational(1, 3, 300).point;
        let v = pullback_value(&f, &s, GraphKind::Upper, &p, 2, 0.86).unwrap();
        // tau(1/3) = 2/3, tau^2(1/3) = 1/3
        let direct = f.value(2.0 / 3.0, f.value(1.0 / 3.0, 0.86));
        assert!((v - direct).abs() < 1e-14);
    }
}
