//! End-to-end scenario runs: trajectories, level sets, graphs, fibres,
//! classification and dimension, written into one output directory.

use std::collections::VecDeque;
use std::path::PathBuf;

use rand::Rng;

use crate::baker::BakerSystem;
use crate::classify::{classify_with_graphs, compute_graphs, middle_xi, ClassificationReport, ScenarioGraphs};
use crate::config::ScenarioConfig;
use crate::dimension::{dimension_estimate, write_dimension_csv, CylinderSampling, DimensionEstimate, DimensionOptions, PressureModel, Verdict};
use crate::error::{Error, Result};
use crate::fibre::FibreFamily;
use crate::graphs::GraphKind;
use crate::hypotheses::{check_hypotheses, HypothesisCertificate};
use crate::output::{csv_writer, write_exponents, write_levelset, CROSSING_HEADER, TRAJECTORY_HEADER};
use crate::rng::stream;
use crate::stablefibre::{integrate_fibre, StableField, FIBRE_CSV_HEADER};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub step: u64,
    pub y_before: f64,
    pub y_after: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRun {
    pub y0: f64,
    pub steps: u64,
    pub crossings: Vec<Crossing>,
    pub final_y: f64,
}

/// Iterate the skew product from a seeded base point.  `visit` sees every
/// state `(step, xi, x, y)` for `step` in `0..=steps`; `xi` is only
/// evaluated when `want_xi(step)` holds since it needs the digit window.
///
/// The digits of `xi` are drawn one at a time, so `tau` never acts on a
/// float; `x` is updated by the contracting inverse branches.
pub fn simulate<F, W, V>(fam: &F, sys: &BakerSystem, seed: u64, y0: f64, steps: u64, want_xi: W, mut visit: V) -> TrajectoryRun
where
    F: FibreFamily + ?Sized,
    W: Fn(u64) -> bool,
    V: FnMut(u64, f64, f64, f64),
{
    let mut rng = stream(seed, 0x7a1);
    let a = sys.split();
    let window = sys.guard_len() + 1;
    let mut digits: VecDeque<u8> = (0..window).map(|_| u8::from(rng.gen::<f64>() >= a)).collect();
    let mut x: f64 = rng.gen();
    let mut y = y0;
    let mut crossings = Vec::new();
    for step in 0..=steps {
        if want_xi(step) {
            let (s1, s2) = digits.as_slices();
            let xi = sys.value_of_digits(&[s1, s2].concat());
            visit(step, xi, x, y);
        }
        if step == steps {
            break;
        }
        let next = fam.value(x, y);
        if (next >= 0.0) != (y >= 0.0) {
            crossings.push(Crossing { step: step + 1, y_before: y, y_after: next });
        }
        y = next;
        let d = digits.pop_front().expect("window is never empty");
        digits.push_back(u8::from(rng.gen::<f64>() >= a));
        x = sys.inverse_branch(d, x);
    }
    TrajectoryRun { y0, steps, crossings, final_y: y }
}

/// Sign crossings only, without output.
pub fn count_crossings<F: FibreFamily + ?Sized>(fam: &F, sys: &BakerSystem, seed: u64, y0: f64, steps: u64) -> TrajectoryRun {
    simulate(fam, sys, seed, y0, steps, |_| false, |_, _, _, _| {})
}

pub struct ScenarioSummary {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub certificate: HypothesisCertificate,
    pub trajectories: Vec<TrajectoryRun>,
    pub report: ClassificationReport,
    pub dimension: Vec<DimensionEstimate>,
}

impl ScenarioSummary {
    pub fn crossings(&self) -> usize {
        self.trajectories.first().map_or(0, |t| t.crossings.len())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("output_dir: {}\n", self.dir.display()));
        s.push_str(&format!("certificate: {}\n", if self.certificate.pass() { "pass" } else { "fail" }));
        for t in &self.trajectories {
            s.push_str(&format!("crossings[y0={}]: {}\n", t.y0, t.crossings.len()));
            if let Some(c) = t.crossings.first() {
                s.push_str(&format!("first_crossing[y0={}]: {}\n", t.y0, c.step));
            }
        }
        s.push_str(&format!("case: {}\nsubcase: {}\n", self.report.case, self.report.subcase));
        if self.report.case == crate::classify::Case::A {
            s.push_str("note: no pinching found, so the pinched set is empty; dimension rows describe the graph potentials only\n");
        }
        for d in &self.dimension {
            let k = d.provenance.map_or("synthetic".to_string(), |k| k.to_string());
            match d.verdict {
                Verdict::Empty => s.push_str(&format!("dimension[{k}]: empty\n")),
                Verdict::Feasible => s.push_str(&format!("dimension[{k}]: {}\n", d.value.unwrap_or(f64::NAN))),
            }
        }
        s
    }
}

/// Dimension estimates for the configured graphs.  A graph whose potential
/// is undefined (escaped middle values) is skipped.
pub fn dimension_rows<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    graphs: &ScenarioGraphs,
    kinds: &[GraphKind],
    order: usize,
    opts: DimensionOptions,
) -> Result<(Vec<DimensionEstimate>, Vec<String>)> {
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for &k in kinds {
        let g = match k {
            GraphKind::Upper => &graphs.upper,
            GraphKind::Lower => &graphs.lower,
            GraphKind::Middle => &graphs.middle,
        };
        match PressureModel::from_graph(fam, sys, g, order, CylinderSampling::Midpoint) {
            Ok(model) => rows.push(dimension_estimate(&model, opts)?),
            Err(Error::InvalidParameter(m)) => notes.push(m),
            Err(e) => return Err(e),
        }
    }
    Ok((rows, notes))
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioSummary> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let fam = cfg.family()?;
    let sys = cfg.system()?;
    let dir = cfg.output_path();
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    let mut emit = |name: &str| {
        let p = dir.join(name);
        files.push(p.clone());
        p
    };

    std::fs::write(emit("config.toml"), cfg.to_toml())?;
    let certificate = check_hypotheses(&fam, &sys, cfg.i(), cfg.j(), cfg.hypothesis_grid)?;
    std::fs::write(emit("certificate.txt"), certificate.to_text())?;
    if !certificate.pass() && !cfg.allow_uncertified {
        return Err(Error::HypothesisFailed(format!("binding constraint {:?}", certificate.binding)));
    }

    // trajectories, thinned for output; crossings at full resolution
    let stride = (cfg.steps - cfg.burn_in).div_ceil(cfg.max_rows).max(1);
    let keep = |s: u64| s >= cfg.burn_in && (s - cfg.burn_in) % stride == 0;
    let mut trajectories = Vec::new();
    let starts: Vec<(f64, &str)> =
        std::iter::once((cfg.y0, "trajectory.csv")).chain(cfg.y0_alt.map(|y| (y, "trajectory_alt.csv"))).collect();
    for (k, (y0, name)) in starts.into_iter().enumerate() {
        let mut w = csv_writer(&emit(name), &TRAJECTORY_HEADER)?;
        let mut err = None;
        let run = simulate(&fam, &sys, seed.wrapping_add(k as u64), y0, cfg.steps, keep, |s, xi, x, y| {
            if err.is_none() {
                if let Err(e) = w.write_record([s.to_string(), xi.to_string(), x.to_string(), y.to_string()]) {
                    err = Some(e);
                }
            }
        });
        if let Some(e) = err {
            return Err(e.into());
        }
        w.flush()?;
        trajectories.push(run);
    }
    let mut w = csv_writer(&emit("crossings.csv"), &CROSSING_HEADER)?;
    for t in &trajectories {
        for c in &t.crossings {
            w.write_record([t.y0.to_string(), c.step.to_string(), c.y_before.to_string(), c.y_after.to_string()])?;
        }
    }
    w.flush()?;

    write_levelset(&emit("levelset.csv"), &fam, &sys, cfg.levelset_nx, cfg.levelset_ny, cfg.levelset_y)?;

    let ccfg = cfg.classify_config();
    let graphs = compute_graphs(&fam, &sys, &ccfg)?;
    graphs.upper.write_csv(&emit("graph_upper.csv"))?;
    graphs.lower.write_csv(&emit("graph_lower.csv"))?;
    graphs.middle.write_csv(&emit("graph_middle.csv"))?;

    let report = classify_with_graphs(&fam, &sys, &ccfg, &graphs)?;
    std::fs::write(emit("classification.txt"), report.to_text())?;
    report.write_margins_csv(&emit("margins.csv"))?;
    write_exponents(&emit("lyapunov.csv"), &cfg.scenario, &report.exponents)?;

    let field = StableField::new(&fam, &sys, cfg.i(), cfg.j(), 1e-10)?;
    let mut anchor_rng = stream(seed, 0xf1b2e);
    for k in 0..cfg.fibre_count {
        let xi = middle_xi(&sys, &ccfg, 100 + k as u64);
        let x: f64 = anchor_rng.gen();
        let y = if k % 2 == 0 { cfg.fibre_y } else { -cfg.fibre_y };
        let fibre = integrate_fibre(&field, &xi, x, y, cfg.fibre_step)?;
        let mut w = csv_writer(&emit(&format!("fibre_{k}.csv")), &FIBRE_CSV_HEADER)?;
        fibre.write_csv(&mut w, &sys)?;
        w.flush()?;
    }

    let opts = DimensionOptions { check_duality: cfg.dimension_check };
    let (dimension, notes) = dimension_rows(&fam, &sys, &graphs, &cfg.dimension_graphs()?, cfg.dimension_order, opts)?;
    write_dimension_csv(&emit("dimension.csv"), &cfg.scenario, &dimension)?;

    let summary = ScenarioSummary { dir: dir.clone(), files: Vec::new(), certificate, trajectories, report, dimension };
    let mut text = summary.to_text();
    for n in notes {
        text.push_str(&format!("note: {n}\n"));
    }
    std::fs::write(emit("summary.txt"), text)?;
    Ok(ScenarioSummary { files, ..summary })
}
