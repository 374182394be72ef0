//! Acceptance run: one PASS/FAIL line per criterion.  Exits non-zero when
//! any criterion fails.

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use skewprod::baker::{random_digits, BakerSystem, SymbolSeq};
use skewprod::classify::{classify_scenario, compute_graphs, Case, ClassifyConfig};
use skewprod::dimension::{dimension_estimate, CylinderSampling, DimensionOptions, PressureModel, Verdict};
use skewprod::fibre::{fixed_points, ArctanFamily, FibreFamily, Stability};
use skewprod::graphs::{middle_value, pullback_graph, GraphKind, Sampling};
use skewprod::grid::Interval;
use skewprod::hypotheses::{check_hypotheses, scan_region};
use skewprod::lyapunov::{forward_exponent, measure_exponent, middle_orbit_exponent, MeasureModel};
use skewprod::rng::stream;
use skewprod::scenario::count_crossings;
use skewprod::stablefibre::{equivariance_residual, integrate_fibre, StableField};
use skewprod::strips::{negative_strip_bound, strip_report};

type Outcome = Result<(bool, String), String>;

const I: Interval = Interval { lo: -0.858, hi: 0.858 };
const J: Interval = Interval { lo: -0.86, hi: 0.86 };

fn fam(eps: f64) -> ArctanFamily {
    ArctanFamily::new(1.1, eps).unwrap()
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e <= limit, format!("{:.1}s of {}s", e.as_secs_f64(), limit.as_secs()))
}

fn hypothesis_certification() -> Outcome {
    let t = Instant::now();
    let c = check_hypotheses(&fam(0.1), &BakerSystem::doubling(), I, J, 1000).map_err(|e| e.to_string())?;
    let (fast, time) = within(t, Duration::from_secs(10));
    let ok = c.pass() && c.expansion_margin >= 0.15 && fast;
    Ok((ok, format!("pass={} expansion_margin={:.4} invariance_margin={:.2e} {time}", c.pass(), c.expansion_margin, c.invariance_margin)))
}

fn region_scan() -> Outcome {
    let t = Instant::now();
    let (m, r) = (Interval { lo: 0.76, hi: 0.98 }, Interval { lo: 1.0, hi: 1.22 });
    let map = scan_region(0.1, m, r, 100, 200, &BakerSystem::doubling()).map_err(|e| e.to_string())?;
    let (fast, time) = within(t, Duration::from_secs(300));
    let tri: Vec<_> = map.cells.iter().filter(|c| c.r >= 1.0 && c.r <= c.m + 0.24 && c.m <= 0.98).collect();
    let failed = tri.iter().filter(|c| !c.pass).count();
    Ok((failed == 0 && !tri.is_empty() && fast, format!("{} triangle cells, {failed} failing, {time}", tri.len())))
}

fn fixed_point_values() -> Outcome {
    let mut msgs = Vec::new();
    let mut ok = true;
    let cases: [(f64, f64, &[f64]); 4] =
        [(0.019, 0.0, &[0.610]), (0.019, 1.0 / 3.0, &[-0.568, 0.451]), (0.04, 0.0, &[0.687]), (0.04, 1.0 / 3.0, &[-0.614])];
    for (eps, x, want) in cases {
        let fps = fixed_points(&fam(eps), x, J, 1e-12).map_err(|e| e.to_string())?;
        let all = if eps == 0.019 && x != 0.0 { 3 } else { 1 };
        let stable: Vec<f64> = fps.iter().filter(|f| f.stability == Stability::Stable).map(|f| f.y).collect();
        let good = fps.len() == all && stable.len() == want.len() && stable.iter().zip(want).all(|(a, b)| (a - b).abs() <= 0.005);
        ok &= good;
        msgs.push(format!("eps={eps} x={x:.3}: {:?}", fps.iter().map(|f| (f.y * 1e4).round() / 1e4).collect::<Vec<_>>()));
    }
    Ok((ok, msgs.join("; ")))
}

fn case_detection() -> Outcome {
    let sys = BakerSystem::doubling();
    let cfg = ClassifyConfig::default();
    let mut ok = true;
    let mut msgs = Vec::new();
    for (eps, want) in [(0.018, Case::A), (0.019, Case::B), (0.04, Case::B)] {
        let t = Instant::now();
        let r = classify_scenario(&fam(eps), &sys, &cfg).map_err(|e| e.to_string())?;
        let (fast, time) = within(t, Duration::from_secs(600));
        let short = r.pinched_periodic().filter(|p| p.period <= 2).count();
        let good = r.case == want
            && fast
            && match want {
                Case::A => r.min_gap > 0.0 && r.pinched_periodic().count() == 0,
                Case::B => short > 0,
            };
        ok &= good;
        msgs.push(format!("eps={eps}: case {} subcase {} min_gap={:.3e} pinched(p<=2)={short} {time}", r.case, r.subcase, r.min_gap));
    }
    Ok((ok, msgs.join("; ")))
}

fn upper_graph_bound() -> Outcome {
    let g = pullback_graph(&fam(0.019), &BakerSystem::doubling(), GraphKind::Upper, 4096, 200, 0.86, Sampling::for_grid(4096, 1))
        .map_err(|e| e.to_string())?;
    let min = g.values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((min > 0.3, format!("min phi+ = {min:.4}")))
}

fn contraction_constants() -> Outcome {
    let sys = BakerSystem::doubling();
    let mut ok = true;
    let mut msgs = Vec::new();
    for (eps, bound) in [(0.018, 0.99), (0.019, 0.997)] {
        let s = strip_report(&fam(eps), &sys, 0.3, 0.86, 1000).map_err(|e| e.to_string())?;
        ok &= s.contraction() < bound;
        msgs.push(format!("eps={eps}: {:.5} < {bound}", s.contraction()));
    }
    Ok((ok, msgs.join("; ")))
}

fn strip_bound() -> Outcome {
    let b = negative_strip_bound(&fam(0.019), &BakerSystem::doubling(), -0.1, Interval { lo: 0.25, hi: 0.75 }, 0.86, 1000)
        .map_err(|e| e.to_string())?;
    let ok = b.pass && (b.cantor_dimension - 0.5).abs() < 1e-12 && b.implied_bound >= 1.5;
    Ok((ok, format!("sup={:.4} C-dimension={} bound={}", b.sup_value, b.cantor_dimension, b.implied_bound)))
}

fn stable_fibre_invariants() -> Outcome {
    let sys = BakerSystem::doubling();
    let f = fam(0.018);
    let field = StableField::new(&f, &sys, I, J, 1e-10).map_err(|e| e.to_string())?;
    let n = field.truncation;

    // functional equation X3 = -A + Gamma X3 o f at 1000 points
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(11, k);
            let xi = random_digits(0.5, n + 1, &mut rng);
            let (x, y): (f64, f64) = (rng.gen(), rng.gen_range(J.lo..J.hi));
            let lhs = field.x3(&xi, x, y)?;
            let rhs = -field.a_term(x, y) + field.gamma(xi[0], x, y) * field.x3(&xi[1..], sys.inverse_branch(xi[0], x), f.value(x, y))?;
            Ok((lhs - rhs).abs())
        })
        .collect::<skewprod::Result<Vec<f64>>>()
        .map_err(|e| e.to_string())?
        .into_iter()
        .fold(0.0, f64::max);
    let fe_ok = worst <= 2.0 * field.tail_bound;

    // equivariance at n = 10
    let mut eq_ok = true;
    let mut eq_worst = 0.0f64;
    for k in 0..4u64 {
        let mut rng = stream(12, k);
        let xi = random_digits(0.5, n + 64, &mut rng);
        let y = if k % 2 == 0 { 0.6 } else { -0.5 };
        let fib = integrate_fibre(&field, &xi, rng.gen(), y, 1e-4).map_err(|e| e.to_string())?;
        let e = equivariance_residual(&field, &fib, 10, 400).map_err(|e| e.to_string())?;
        eq_ok &= e.residual <= e.envelope + e.budget && e.compared > 0;
        eq_worst = eq_worst.max(e.residual / (e.envelope + e.budget));
    }

    // exponents of two points on one fibre agree better with longer orbits
    let len = 10_000 + n;
    let improved = (0..20u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(13, k);
            let xi = random_digits(0.5, len, &mut rng);
            let y = if k % 2 == 0 { 0.6 } else { -0.55 };
            let fib = integrate_fibre(&field, &xi, rng.gen(), y, 1e-4)?;
            let d = fib.domain();
            let pts: Vec<(SymbolSeq, f64)> = [0.2, 0.8]
                .iter()
                .map(|t| {
                    let u = d.lo + t * d.width();
                    (SymbolSeq::with_resolved_x(&sys, u, 52, 64, &xi, &mut rng), fib.eval(u).unwrap())
                })
                .collect();
            let gap = |steps: usize| -> skewprod::Result<f64> {
                let a = forward_exponent(&f, &sys, &pts[0].0, pts[0].1, steps)?.value;
                let b = forward_exponent(&f, &sys, &pts[1].0, pts[1].1, steps)?.value;
                Ok((a - b).abs())
            };
            Ok(gap(10_000)? < gap(1_000)?)
        })
        .collect::<skewprod::Result<Vec<bool>>>()
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|b| *b)
        .count();
    let ok = fe_ok && eq_ok && improved >= 18;
    Ok((
        ok,
        format!(
            "functional eq {worst:.2e} <= 2x{:.2e}; equivariance worst ratio {eq_worst:.3}; exponent gap shrinks for {improved}/20",
            field.tail_bound
        ),
    ))
}

fn exponent_trichotomy() -> Outcome {
    let sys = BakerSystem::doubling();
    let f = fam(0.018);
    let cfg = ClassifyConfig::default();
    let graphs = compute_graphs(&f, &sys, &cfg).map_err(|e| e.to_string())?;
    let mut graph_exp = Vec::new();
    for g in [&graphs.upper, &graphs.middle, &graphs.lower] {
        let e = measure_exponent(&f, &sys, g, &MeasureModel::Lebesgue, 4000, 3).map_err(|e| e.to_string())?;
        graph_exp.push((g.kind, e.value, e.stderr));
    }
    const STEPS: usize = 1_000_000;
    let depth = 200;
    let rows = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(21, k);
            let point = MeasureModel::Lebesgue.sample(&sys, 64, STEPS + depth, &mut rng);
            let mid = match middle_value(&f, &sys, &point, depth, 0.0, J)? {
                Ok(v) => v,
                Err(_) => return Ok(None),
            };
            // every fifth point sits on the middle graph, the rest are random
            let (kind, est) = if k % 5 == 0 {
                (GraphKind::Middle, middle_orbit_exponent(&f, &sys, &point, STEPS, depth, 0.0, J)?)
            } else {
                let y = rng.gen_range(J.lo..J.hi);
                let kind = if y > mid { GraphKind::Upper } else { GraphKind::Lower };
                (kind, forward_exponent(&f, &sys, &point, y, STEPS)?)
            };
            Ok(Some((kind, est.value, est.stderr)))
        })
        .collect::<skewprod::Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    // each point is compared with the graph it is attracted to: the middle
    // graph itself, or the bounding graph on its side of the middle graph
    let mut ok = true;
    let mut counts = [0usize; 3];
    let mut worst = 0.0f64;
    for (kind, v, se) in rows.iter().flatten() {
        let ix = graph_exp.iter().position(|g| g.0 == *kind).unwrap();
        let (_, gv, gse) = graph_exp[ix];
        let z = (v - gv).abs() / (se * se + gse * gse).sqrt();
        if std::env::var("ACCEPTANCE_VERBOSE").is_ok() {
            eprintln!("{kind} {v:.5} se {se:.2e} z {z:.2}");
        }
        worst = worst.max(z);
        ok &= z <= 3.0;
        counts[ix] += 1;
    }
    let evaluated = rows.iter().flatten().count();
    ok &= evaluated >= 45 && counts.iter().all(|c| *c > 0);
    Ok((
        ok,
        format!(
            "graph exponents {:?}; points on upper/middle/lower = {counts:?} of {evaluated}; worst z = {worst:.2}",
            graph_exp.iter().map(|(k, v, se)| format!("{k}:{v:.5}+-{se:.1e}")).collect::<Vec<_>>()
        ),
    ))
}

fn dimension_sanity() -> Outcome {
    let t = Instant::now();
    let sys = BakerSystem::doubling();
    let opts = DimensionOptions::default();
    let neg = dimension_estimate(&PressureModel::constant(&sys, 8, -0.1).unwrap(), opts).map_err(|e| e.to_string())?;
    let pos = dimension_estimate(&PressureModel::constant(&sys, 8, 0.1).unwrap(), opts).map_err(|e| e.to_string())?;
    let f = fam(0.019);
    let graphs = compute_graphs(&f, &sys, &ClassifyConfig::default()).map_err(|e| e.to_string())?;
    let mut s = Vec::new();
    let mut gaps = Vec::new();
    for n in [8, 10] {
        let m = PressureModel::from_graph(&f, &sys, &graphs.upper, n, CylinderSampling::Midpoint).map_err(|e| e.to_string())?;
        let e = dimension_estimate(&m, opts).map_err(|e| e.to_string())?;
        s.push(e.s_star.unwrap_or(f64::NAN));
        gaps.push(e.gap_diagnostic.unwrap_or(f64::INFINITY));
        // the same potential recentred so that the constraint binds
        let mean = m.psi.iter().sum::<f64>() / m.psi.len() as f64;
        let (lo, hi) = m.psi.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        let moved: Vec<f64> = m.psi.iter().map(|v| v - mean + 0.15 * (hi - lo)).collect();
        let e = dimension_estimate(&PressureModel::from_potential(&sys, n, moved).unwrap(), opts).map_err(|e| e.to_string())?;
        gaps.push(e.gap_diagnostic.unwrap_or(f64::INFINITY));
    }
    let (fast, time) = within(t, Duration::from_secs(900));
    let stability = (s[0] - s[1]).abs();
    let gap = gaps.iter().copied().fold(0.0, f64::max);
    let ok = neg.value == Some(2.0)
        && pos.verdict == Verdict::Empty
        && gap < 1e-2
        && stability < 5e-2
        && fast;
    Ok((
        ok,
        format!("c<0 dim={:?}; c>0 {:?}; s*(8)={:.4} s*(10)={:.4}; worst duality gap {gap:.2e}; {time}", neg.value, pos.verdict, s[0], s[1]),
    ))
}

fn crossings() -> Outcome {
    let sys = BakerSystem::doubling();
    let c04 = count_crossings(&fam(0.04), &sys, 1, -1.0, 10_000_000).crossings;
    let c08 = count_crossings(&fam(0.08), &sys, 1, -1.0, 10_000_000).crossings;
    let ok = !c04.is_empty() && c08.len() > c04.len();
    Ok((
        ok,
        format!("eps=0.04: {} (first at step {:?}); eps=0.08: {}", c04.len(), c04.first().map(|c| c.step), c08.len()),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("hypothesis certification", hypothesis_certification),
        ("region scan", region_scan),
        ("fixed points", fixed_point_values),
        ("case detection", case_detection),
        ("phi+ lower bound", upper_graph_bound),
        ("contraction constants", contraction_constants),
        ("strip bound", strip_bound),
        ("stable-fibre invariants", stable_fibre_invariants),
        ("exponent trichotomy", exponent_trichotomy),
        ("dimension sanity", dimension_sanity),
        ("crossing phenomenology", crossings),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!("{} {name} ({:.1}s): {detail}", if ok { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
