//! Case A / case B decision and subcase evidence.
//!
//! Case B is certified by a periodic point where the fibre map composed over
//! the orbit has a single fixed point, since the bounding graphs then meet.
//! Everything else is graded evidence.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baker::{random_digits, BakerSystem, SymbolSeq};
use crate::error::{Error, Result};
use crate::fibre::{FibreFamily, FixedPoint};
use crate::graphs::{middle_graph, middle_value_along, pinched_scan, pullback_graph, GraphGrid, GraphKind, Probe, ProbeGap, Sampling};
use crate::grid::Interval;
use crate::lyapunov::{measure_exponent, periodic_fixed_points, MeasureModel};
use crate::rng::stream;
use crate::stablefibre::{integrate_fibre, StableField, StableFibre};
use crate::strips::{strip_report, StripReport};

/// Largest period accepted by `periodic_pinch_test`.
pub const MAX_PINCH_PERIOD: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicPinch {
    pub x: f64,
    pub word: Vec<u8>,
    pub period: usize,
    pub pinched: bool,
    pub fixed_points: Vec<FixedPoint>,
}

/// For every `tau`-periodic `x` of minimal period up to `max_period`, count
/// the fixed points of the fibre map composed over its orbit.
pub fn periodic_pinch_test<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    max_period: usize,
    bracket: Interval,
) -> Result<Vec<PeriodicPinch>> {
    if max_period == 0 || max_period > MAX_PINCH_PERIOD {
        return Err(Error::InvalidParameter(format!("max_period must lie in 1..={MAX_PINCH_PERIOD}")));
    }
    let mut points = Vec::new();
    for p in 1..=max_period {
        points.extend(sys.periodic_points(p)?.into_iter().filter(|pt| pt.minimal_period == p));
    }
    points
        .par_iter()
        .map(|pt| {
            let (fps, _) = periodic_fixed_points(fam, sys, &pt.word, bracket)?;
            Ok(PeriodicPinch { x: pt.x, word: pt.word.clone(), period: pt.minimal_period, pinched: fps.len() == 1, fixed_points: fps })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grade {
    Certified,
    Evidence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subcase {
    A1,
    A2Plus,
    A2Minus,
    A2,
    B2,
    B2i,
    B2ii,
    Inconclusive,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if *self == Case::A { "A" } else { "B" })
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if *self == Grade::Certified { "certified" } else { "evidence" })
    }
}

impl fmt::Display for Subcase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subcase::A1 => "A1",
            Subcase::A2Plus => "A2+",
            Subcase::A2Minus => "A2-",
            Subcase::A2 => "A2",
            Subcase::B2 => "B2",
            Subcase::B2i => "B2-i",
            Subcase::B2ii => "B2-ii",
            Subcase::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub grid: usize,
    pub depth: usize,
    /// Anchor of the pullbacks; `J = [-m, m]`.
    pub m: f64,
    pub i: Interval,
    /// Gap below which graphs count as pinched.
    pub tol: f64,
    pub max_period: usize,
    pub seed: u64,
    pub fibre_step: f64,
    /// Strip level used for the continuity evidence.
    pub band: f64,
    pub exponent_samples: usize,
    /// Threshold on the fibre/graph distance for the B2-ii test.
    pub coincidence_tol: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            grid: 4096,
            depth: 200,
            m: 0.86,
            i: Interval { lo: -0.858, hi: 0.858 },
            tol: 1e-3,
            max_period: 6,
            seed: 1,
            fibre_step: 1e-4,
            band: 0.3,
            exponent_samples: 4000,
            coincidence_tol: 1e-3,
        }
    }
}

impl ClassifyConfig {
    pub fn j(&self) -> Interval {
        Interval { lo: -self.m, hi: self.m }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentRow {
    pub graph: GraphKind,
    pub measure: String,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub note: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ClassificationReport {
    pub case: Case,
    pub case_grade: Grade,
    pub subcase: Subcase,
    pub min_gap: f64,
    pub grid_min_gap: f64,
    pub probes: Vec<ProbeGap>,
    pub periodic: Vec<PeriodicPinch>,
    /// `(distance to the upper band, distance to the lower band)` of the
    /// stable fibre through the middle graph.
    pub band_distances: Option<(f64, f64)>,
    /// Largest distance between the continuous bounding graph and stable
    /// fibres through it, for two choices of `xi`.
    pub fibre_coincidence: Option<(f64, f64)>,
    pub strips: StripReport,
    pub exponents: Vec<ExponentRow>,
    pub middle_escaped: usize,
    pub notes: Vec<String>,
}

impl ClassificationReport {
    pub fn pinched_periodic(&self) -> impl Iterator<Item = &PeriodicPinch> {
        self.periodic.iter().filter(|p| p.pinched)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(": ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("case", self.case.to_string());
        kv("case_grade", self.case_grade.to_string());
        kv("subcase", self.subcase.to_string());
        kv("subcase_grade", "evidence".into());
        kv("min_gap", self.min_gap.to_string());
        kv("grid_min_gap", self.grid_min_gap.to_string());
        let pinched: Vec<String> = self.pinched_periodic().map(|p| format!("{} (period {})", p.x, p.period)).collect();
        kv("pinched_periodic", if pinched.is_empty() { "none".into() } else { pinched.join(", ") });
        kv("periodic_points_tested", self.periodic.len().to_string());
        for p in &self.probes {
            kv(&format!("probe_gap[{}]", p.label), p.gap.to_string());
        }
        if let Some((u, l)) = self.band_distances {
            kv("fibre_to_upper_band", u.to_string());
            kv("fibre_to_lower_band", l.to_string());
        }
        if let Some((a, b)) = self.fibre_coincidence {
            kv("fibre_coincidence", a.to_string());
            kv("fibre_coincidence_second_xi", b.to_string());
        }
        kv("strip_level", self.strips.y0.to_string());
        kv("upper_strip_invariance", self.strips.upper_invariance.to_string());
        kv("lower_strip_invariance", self.strips.lower_invariance.to_string());
        kv("upper_strip_contraction", self.strips.upper_contraction.to_string());
        kv("lower_strip_contraction", self.strips.lower_contraction.to_string());
        kv("middle_escaped", self.middle_escaped.to_string());
        for e in &self.exponents {
            kv(&format!("exponent[{}, {}]", e.graph, e.measure), format!("{} +- {}", e.value, e.stderr));
        }
        for n in &self.notes {
            kv("note", n.clone());
        }
        s
    }

    pub fn write_margins_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["criterion", "value", "threshold"])?;
        let mut row = |c: &str, v: f64, t: f64| w.write_record([c.to_string(), v.to_string(), t.to_string()]);
        row("min_gap", self.min_gap, 0.0)?;
        row("grid_min_gap", self.grid_min_gap, 0.0)?;
        row("pinched_periodic_count", self.pinched_periodic().count() as f64, 0.0)?;
        if let Some((u, l)) = self.band_distances {
            row("fibre_to_upper_band", u, 0.0)?;
            row("fibre_to_lower_band", l, 0.0)?;
        }
        if let Some((a, b)) = self.fibre_coincidence {
            row("fibre_coincidence", a, 0.0)?;
            row("fibre_coincidence_second_xi", b, 0.0)?;
        }
        row("upper_strip_invariance", self.strips.upper_invariance, 0.0)?;
        row("lower_strip_invariance", self.strips.lower_invariance, 0.0)?;
        row("upper_strip_contraction", self.strips.upper_contraction, 1.0)?;
        row("lower_strip_contraction", self.strips.lower_contraction, 1.0)?;
        for e in &self.exponents {
            row(&format!("exponent[{}|{}]", e.graph, e.measure), e.value, 0.0)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The three graphs used by the classification.
pub struct ScenarioGraphs {
    pub upper: GraphGrid,
    pub lower: GraphGrid,
    pub middle: GraphGrid,
}

pub fn compute_graphs<F: FibreFamily + ?Sized>(fam: &F, sys: &BakerSystem, cfg: &ClassifyConfig) -> Result<ScenarioGraphs> {
    let sampling = Sampling::for_grid(cfg.grid, cfg.seed);
    let upper = pullback_graph(fam, sys, GraphKind::Upper, cfg.grid, cfg.depth, cfg.m, sampling)?;
    let lower = pullback_graph(fam, sys, GraphKind::Lower, cfg.grid, cfg.depth, cfg.m, sampling)?;
    let xi = middle_xi(sys, cfg, 0);
    let middle = middle_graph(fam, sys, &xi, cfg.grid, cfg.depth, 0.0, cfg.j())?;
    Ok(ScenarioGraphs { upper, lower, middle })
}

/// Digits of a generic `xi` long enough for graphs and stable fibres.
pub fn middle_xi(sys: &BakerSystem, cfg: &ClassifyConfig, index: u64) -> Vec<u8> {
    random_digits(sys.split(), cfg.depth + 2000, &mut stream(cfg.seed ^ 0x0c1a_551f, index))
}

/// Exact probes at small-period points.
pub fn default_probes(sys: &BakerSystem, depth: usize) -> Vec<Probe> {
    let len = depth + sys.guard_len() + 2;
    if sys.is_doubling() {
        let mut v = Vec::new();
        for den in [1u64, 2, 3, 4, 5, 7] {
            for num in 0..den {
                if num == 0 && den > 1 || gcd(num, den) != 1 && num != 0 {
                    continue;
                }
                v.push(Probe::rational(num, den, len));
            }
        }
        v
    } else {
        (1..=3)
            .flat_map(|p| sys.periodic_points(p).expect("small period").into_iter().filter(move |pt| pt.minimal_period == p))
            .map(|pt| Probe {
                label: pt.word.iter().map(|d| d.to_string()).collect::<String>(),
                point: SymbolSeq::periodic_past(&pt.word, len, 0),
            })
            .collect()
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

pub fn classify_scenario<F: FibreFamily + ?Sized>(fam: &F, sys: &BakerSystem, cfg: &ClassifyConfig) -> Result<ClassificationReport> {
    let graphs = compute_graphs(fam, sys, cfg)?;
    classify_with_graphs(fam, sys, cfg, &graphs)
}

pub fn classify_with_graphs<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    cfg: &ClassifyConfig,
    graphs: &ScenarioGraphs,
) -> Result<ClassificationReport> {
    let j = cfg.j();
    let mut notes = Vec::new();
    let scan = pinched_scan(fam, sys, &graphs.upper, &graphs.lower, cfg.tol, &default_probes(sys, cfg.depth))?;
    let periodic = periodic_pinch_test(fam, sys, cfg.max_period, j)?;
    let strips = strip_report(fam, sys, cfg.band, cfg.m, 400)?;

    let mut exponents = Vec::new();
    let mut measures = vec![MeasureModel::Lebesgue];
    measures.push(MeasureModel::Periodic { word: vec![0] });
    measures.push(MeasureModel::Periodic { word: vec![0, 1] });
    for mu in &measures {
        for (kind, g) in [(GraphKind::Lower, &graphs.lower), (GraphKind::Middle, &graphs.middle), (GraphKind::Upper, &graphs.upper)] {
            let e = measure_exponent(fam, sys, g, mu, cfg.exponent_samples, cfg.seed)?;
            exponents.push(ExponentRow { graph: kind, measure: mu.to_string(), value: e.value, stderr: e.stderr, n: e.n, note: e.note });
        }
    }

    let pinched_any = periodic.iter().any(|p| p.pinched);
    let negative_middle = exponents.iter().find(|e| e.graph == GraphKind::Middle && e.value + 3.0 * e.stderr < 0.0);
    let (case, case_grade) = if pinched_any {
        (Case::B, Grade::Certified)
    } else if let Some(e) = negative_middle {
        notes.push(format!("middle exponent {} under {} is negative", e.value, e.measure));
        (Case::B, Grade::Evidence)
    } else if scan.min_gap >= cfg.tol {
        notes.push("case A is evidence only: a finer grid could still reveal pinching".into());
        (Case::A, Grade::Evidence)
    } else {
        notes.push("graphs meet on the grid but no pinched periodic point was found".into());
        (Case::B, Grade::Evidence)
    };

    let field = StableField::new(fam, sys, cfg.i, j, 1e-10)?;
    let mut band_distances = None;
    let mut fibre_coincidence = None;
    let subcase = match case {
        Case::A => {
            let xi = middle_xi(sys, cfg, 0);
            match middle_value_along(fam, sys, 0.5, &xi[..cfg.depth], 0.0, j) {
                Err(_) => {
                    notes.push("middle graph escaped at the fibre anchor".into());
                    Subcase::Inconclusive
                }
                Ok(y) => {
                    let fibre = integrate_fibre(&field, &xi, 0.5, y, cfg.fibre_step)?;
                    let (du, dl) = band_distance(&fibre, &graphs.upper, &graphs.lower);
                    band_distances = Some((du, dl));
                    match (du > cfg.tol, dl > cfg.tol) {
                        (true, true) => Subcase::A1,
                        (false, true) => Subcase::A2Plus,
                        (true, false) => Subcase::A2Minus,
                        (false, false) => Subcase::A2,
                    }
                }
            }
        }
        Case::B => {
            let hat = if strips.upper_continuous() {
                Some(&graphs.upper)
            } else if strips.lower_continuous() {
                Some(&graphs.lower)
            } else {
                None
            };
            match hat {
                None => {
                    notes.push("no continuity evidence for either bounding graph; B1 and B2 both possible".into());
                    Subcase::Inconclusive
                }
                Some(g) => {
                    notes.push(format!("{} graph is continuous (invariant contracted strip), which rules out B1", g.kind));
                    let d0 = fibre_graph_distance(&field, sys, cfg, g, 0)?;
                    let d1 = fibre_graph_distance(&field, sys, cfg, g, 1)?;
                    fibre_coincidence = Some((d0, d1));
                    if d0 < cfg.coincidence_tol && d1 < cfg.coincidence_tol {
                        Subcase::B2ii
                    } else if d0 > cfg.coincidence_tol {
                        notes.push("stable fibre departs from the continuous graph: B2-i suggested".into());
                        Subcase::B2i
                    } else {
                        Subcase::B2
                    }
                }
            }
        }
    };

    Ok(ClassificationReport {
        case,
        case_grade,
        subcase,
        min_gap: scan.min_gap,
        grid_min_gap: scan.grid_min_gap,
        probes: scan.probes,
        periodic,
        band_distances,
        fibre_coincidence,
        strips,
        exponents,
        middle_escaped: graphs.middle.escaped(),
        notes,
    })
}

/// Distances from a fibre to the band below the upper graph and above the
/// lower graph.  The bands are the closures of the graphs read as
/// `min`/`max` over the two neighbouring grid cells.
pub fn band_distance(fibre: &StableFibre, upper: &GraphGrid, lower: &GraphGrid) -> (f64, f64) {
    let n = upper.len();
    let env = |g: &GraphGrid, u: f64, lowest: bool| {
        let c = (u * n as f64).floor() as isize;
        (c - 2..=c + 2)
            .map(|k| g.values[k.rem_euclid(n as isize) as usize])
            .fold(if lowest { f64::INFINITY } else { f64::NEG_INFINITY }, |a, b| if lowest { a.min(b) } else { a.max(b) })
    };
    let mut du = f64::INFINITY;
    let mut dl = f64::INFINITY;
    for (&u, &l) in fibre.us.iter().zip(&fibre.ells) {
        du = du.min(env(upper, u, true) - l);
        dl = dl.min(l - env(lower, u, false));
    }
    (du, dl)
}

fn fibre_graph_distance<F: FibreFamily + ?Sized>(
    field: &StableField<'_, F>,
    sys: &BakerSystem,
    cfg: &ClassifyConfig,
    g: &GraphGrid,
    index: u64,
) -> Result<f64> {
    let xi = middle_xi(sys, cfg, 100 + index);
    let x0 = 0.5;
    let fibre = integrate_fibre(field, &xi, x0, g.interp(x0), cfg.fibre_step)?;
    Ok(fibre.us.iter().zip(&fibre.ells).map(|(&u, &l)| (l - g.interp(u)).abs()).fold(0.0, f64::max))
}
