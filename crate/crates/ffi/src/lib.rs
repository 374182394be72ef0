//! C interface.  Objects are opaque handles created by `*_new` functions
//! and released by the matching `*_free`.  Every fallible call returns an
//! [`SpStatus`]; on failure [`sp_last_error`] describes the problem.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use skewprod::classify::{classify_scenario, ClassificationReport, ClassifyConfig};
use skewprod::dimension::{dimension_estimate, CylinderSampling, DimensionOptions, PressureModel, Verdict};
use skewprod::error::Error;
use skewprod::fibre::fixed_points;
use skewprod::graphs::{middle_graph, pullback_graph, GraphGrid, GraphKind, Sampling};
use skewprod::grid::Interval;
use skewprod::hypotheses::check_hypotheses;
use skewprod::lyapunov::{measure_exponent, MeasureModel};
use skewprod::scenario::count_crossings;
use skewprod::{ArctanFamily, BakerSystem};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    InvalidArgument = 1,
    HypothesisFailed = 2,
    NoConvergence = 3,
    NullPointer = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpGraphKind {
    Upper = 0,
    Lower = 1,
    Middle = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpMeasure {
    Lebesgue = 0,
    /// Independent digits, `1` with the given probability.
    Bernoulli = 1,
}

/// A forced arctan family over a baker map.
pub struct SpSystem {
    sys: BakerSystem,
    fam: ArctanFamily,
}

pub struct SpGraph(GraphGrid);

pub struct SpReport {
    report: ClassificationReport,
    text: CString,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SpCertificate {
    pub pass: bool,
    pub eps0: f64,
    pub expansion_margin: f64,
    pub invariance_margin: f64,
    pub schwarzian_max: f64,
    pub slope_min: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct SpDimension {
    /// False when the pinched set is empty at this order.
    pub feasible: bool,
    pub s_star: f64,
    pub q_star: f64,
    pub dimension: f64,
    /// NaN when the primal check was skipped.
    pub gap: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SpStatus {
    match e.exit_code() {
        2 => SpStatus::HypothesisFailed,
        3 => SpStatus::NoConvergence,
        _ => match e {
            Error::InvalidParameter(_) | Error::Config(_) | Error::PeriodTooLarge(_) => SpStatus::InvalidArgument,
            _ => SpStatus::Internal,
        },
    }
}

fn guard<F: FnOnce() -> Result<(), SpStatus>>(f: F) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            SpStatus::Internal
        }
    }
}

fn lift<T>(r: skewprod::Result<T>) -> Result<T, SpStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, SpStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument".into());
        SpStatus::NullPointer
    })
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, SpStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer".into());
        SpStatus::NullPointer
    })
}

/// Message for the last failed call on this thread.  The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `out_sys` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sp_system_new(r: f64, eps: f64, a: f64, out_sys: *mut *mut SpSystem) -> SpStatus {
    guard(|| {
        let slot = out(out_sys)?;
        let fam = lift(ArctanFamily::new(r, eps))?;
        let sys = lift(BakerSystem::new(a))?;
        *slot = Box::into_raw(Box::new(SpSystem { sys, fam }));
        Ok(())
    })
}

/// # Safety
/// `sys` must come from [`sp_system_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sp_system_free(sys: *mut SpSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Certify the hypotheses on `I = [i_lo, i_hi]` inside `J = [j_lo, j_hi]`.
/// A failed certificate is reported through `out_cert.pass`, not the status.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sp_check_hypotheses(
    sys: *const SpSystem,
    i_lo: f64,
    i_hi: f64,
    j_lo: f64,
    j_hi: f64,
    grid: usize,
    out_cert: *mut SpCertificate,
) -> SpStatus {
    guard(|| {
        let s = deref(sys)?;
        let slot = out(out_cert)?;
        let i = lift(Interval::new(i_lo, i_hi))?;
        let j = lift(Interval::new(j_lo, j_hi))?;
        let c = lift(check_hypotheses(&s.fam, &s.sys, i, j, grid))?;
        *slot = SpCertificate {
            pass: c.pass(),
            eps0: c.eps0,
            expansion_margin: c.expansion_margin,
            invariance_margin: c.invariance_margin,
            schwarzian_max: c.schwarzian_max,
            slope_min: c.slope_min,
        };
        Ok(())
    })
}

/// Fixed points of `f_x` in `[lo, hi]`, increasing.  Writes at most `cap`
/// values and the total count to `out_len`; returns `BufferTooSmall` when
/// `cap` is short.
///
/// # Safety
/// `ys` and `slopes` must hold `cap` doubles (or be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn sp_fixed_points(
    sys: *const SpSystem,
    x: f64,
    lo: f64,
    hi: f64,
    ys: *mut f64,
    slopes: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> SpStatus {
    guard(|| {
        let s = deref(sys)?;
        let len = out(out_len)?;
        let fps = lift(fixed_points(&s.fam, x, lift(Interval::new(lo, hi))?, 1e-12))?;
        *len = fps.len();
        if fps.len() > cap {
            set_error(format!("{} fixed points, buffer holds {cap}", fps.len()));
            return Err(SpStatus::BufferTooSmall);
        }
        if !fps.is_empty() && (ys.is_null() || slopes.is_null()) {
            set_error("null output buffer".into());
            return Err(SpStatus::NullPointer);
        }
        for (k, fp) in fps.iter().enumerate() {
            *ys.add(k) = fp.y;
            *slopes.add(k) = fp.slope;
        }
        Ok(())
    })
}

/// Invariant graph on `n` nodes.  Bounding graphs are pullbacks of depth
/// `depth` from `-anchor`/`+anchor`; the middle graph starts at `0` and is
/// kept inside `[-anchor, anchor]`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sp_graph_new(
    sys: *const SpSystem,
    kind: SpGraphKind,
    n: usize,
    depth: usize,
    anchor: f64,
    seed: u64,
    out_graph: *mut *mut SpGraph,
) -> SpStatus {
    guard(|| {
        let s = deref(sys)?;
        let slot = out(out_graph)?;
        let g = match kind {
            SpGraphKind::Upper => pullback_graph(&s.fam, &s.sys, GraphKind::Upper, n, depth, anchor, Sampling::for_grid(n, seed)),
            SpGraphKind::Lower => pullback_graph(&s.fam, &s.sys, GraphKind::Lower, n, depth, anchor, Sampling::for_grid(n, seed)),
            SpGraphKind::Middle => {
                let cfg = ClassifyConfig { depth, seed, ..ClassifyConfig::default() };
                let xi = skewprod::classify::middle_xi(&s.sys, &cfg, 0);
                Interval::symmetric(anchor).and_then(|j| middle_graph(&s.fam, &s.sys, &xi, n, depth, 0.0, j))
            }
        };
        *slot = Box::into_raw(Box::new(SpGraph(lift(g)?)));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from [`sp_graph_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sp_graph_free(graph: *mut SpGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sp_graph_len(graph: *const SpGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.len())
}

/// Interpolated value at `x`; NaN for a null handle.
///
/// # Safety
/// `graph` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sp_graph_eval(graph: *const SpGraph, x: f64) -> f64 {
    graph.as_ref().map_or(f64::NAN, |g| g.0.interp(x))
}

/// Copy node abscissae and values into buffers of length `cap`.
///
/// # Safety
/// `xs` and `values` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_graph_values(graph: *const SpGraph, xs: *mut f64, values: *mut f64, cap: usize) -> SpStatus {
    guard(|| {
        let g = &deref(graph)?.0;
        if cap < g.len() {
            set_error(format!("graph has {} nodes, buffer holds {cap}", g.len()));
            return Err(SpStatus::BufferTooSmall);
        }
        if xs.is_null() || values.is_null() {
            set_error("null output buffer".into());
            return Err(SpStatus::NullPointer);
        }
        ptr::copy_nonoverlapping(g.xs.as_ptr(), xs, g.len());
        ptr::copy_nonoverlapping(g.values.as_ptr(), values, g.len());
        Ok(())
    })
}

/// Fibre exponent of the graph for a base measure.  `p1` is only read for
/// `Bernoulli`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sp_graph_exponent(
    sys: *const SpSystem,
    graph: *const SpGraph,
    measure: SpMeasure,
    p1: f64,
    samples: usize,
    seed: u64,
    out_value: *mut f64,
    out_stderr: *mut f64,
) -> SpStatus {
    guard(|| {
        let s = deref(sys)?;
        let g = &deref(graph)?.0;
        let (v, se) = (out(out_value)?, out(out_stderr)?);
        let mu = match measure {
            SpMeasure::Lebesgue => MeasureModel::Lebesgue,
            SpMeasure::Bernoulli => MeasureModel::Bernoulli { p1 },
        };
        let e = lift(measure_exponent(&s.fam, &s.sys, g, &mu, samples, seed))?;
        *v = e.value;
        *se = e.stderr;
        Ok(())
    })
}

/// Classify with the default settings except for grid, depth and seed.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sp_classify(
    sys: *const SpSystem,
    grid: usize,
    depth: usize,
    seed: u64,
    out_report: *mut *mut SpReport,
) -> SpStatus {
    guard(|| {
        let s = deref(sys)?;
        let slot = out(out_report)?;
        let cfg = ClassifyConfig { grid, depth, seed, ..ClassifyConfig::default() };
        let report = lift(classify_scenario(&s.fam, &s.sys, &cfg))?;
        let text = CString::new(report.to_text()).unwrap_or_default();
        *slot = Box::into_raw(Box::new(SpReport { report, text }));
        Ok(())
    })
}

/// # Safety
/// `report` must come from [`sp_classify`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sp_report_free(report: *mut SpReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// `'A'` or `'B'`; `0` for a null handle.
///
/// # Safety
/// `report` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sp_report_case(report: *const SpReport) -> c_char {
    match report.as_ref().map(|r| r.report.case) {
        Some(skewprod::classify::Case::A) => b'A' as c_char,
        Some(skewprod::classify::Case::B) => b'B' as c_char,
        None => 0,
    }
}

/// Smallest refined gap between the bounding graphs; NaN for a null handle.
///
/// # Safety
/// `report` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sp_report_min_gap(report: *const SpReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.report.min_gap)
}

/// Report as `key: value` lines, owned by the handle.
///
/// # Safety
/// `report` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn sp_report_text(report: *const SpReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.text.as_ptr())
}

/// Dimension estimate from the graph's potential at cylinder order `order`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sp_dimension(
    sys: *const SpSystem,
    graph: *const SpGraph,
    order: usize,
    check: bool,
    out_dim: *mut SpDimension,
) -> SpStatus {
    guard(|| {
        let s = deref(sys)?;
        let g = &deref(graph)?.0;
        let slot = out(out_dim)?;
        let model = lift(PressureModel::from_graph(&s.fam, &s.sys, g, order, CylinderSampling::Midpoint))?;
        let d = lift(dimension_estimate(&model, DimensionOptions { check_duality: check }))?;
        *slot = SpDimension {
            feasible: d.verdict == Verdict::Feasible,
            s_star: d.s_star.unwrap_or(f64::NAN),
            q_star: d.q_star.unwrap_or(f64::NAN),
            dimension: d.value.unwrap_or(0.0),
            gap: d.gap_diagnostic.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Number of sign changes of `y` along a seeded trajectory from `y0`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sp_count_crossings(sys: *const SpSystem, seed: u64, y0: f64, steps: u64, out_count: *mut u64) -> SpStatus {
    guard(|| {
        let s = deref(sys)?;
        let slot = out(out_count)?;
        *slot = count_crossings(&s.fam, &s.sys, seed, y0, steps).crossings.len() as u64;
        Ok(())
    })
}
