//! Values checked against independent computations done here, frozen to
//! the digits printed by a 30-digit reference solver.

use approx::assert_abs_diff_eq;
use skewprod::baker::{rational_digits, BakerSystem};
use skewprod::dimension::{min_cycle_mean, pressure_eval, PressureModel};
use skewprod::fibre::{fixed_points, ArctanFamily, FibreFamily, Stability};
use skewprod::graphs::{pullback_graph, GraphKind, Sampling};
use skewprod::grid::Interval;

const J: Interval = Interval { lo: -0.86, hi: 0.86 };

/// Roots of `f_x(y) - y` by sign scanning and plain bisection.
fn oracle_roots(eps: f64, x: f64) -> Vec<f64> {
    let g = |y: f64| (1.1 * y).atan() + eps * (2.0 * std::f64::consts::PI * x).cos() - y;
    let n = 20_000;
    let mut out = Vec::new();
    for k in 0..n {
        let (mut a, mut b) = (J.lo + J.width() * k as f64 / n as f64, J.lo + J.width() * (k + 1) as f64 / n as f64);
        if g(a) == 0.0 {
            out.push(a);
            continue;
        }
        if g(a) * g(b) > 0.0 {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if g(a) * g(m) <= 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

#[test]
fn fixed_points_match_bisection_and_reference_digits() {
    let cases: [(f64, f64, &[f64]); 4] = [
        (0.019, 0.0, &[0.609985948558129]),
        (0.019, 1.0 / 3.0, &[-0.567786754478432, 0.099315295472562, 0.451193847033802]),
        (0.04, 0.0, &[0.687463769633742]),
        (0.04, 1.0 / 3.0, &[-0.614099790816712]),
    ];
    for (eps, x, frozen) in cases {
        let fam = ArctanFamily::new(1.1, eps).unwrap();
        let got = fixed_points(&fam, x, J, 1e-13).unwrap();
        let oracle = oracle_roots(eps, x);
        assert_eq!(got.len(), frozen.len(), "eps {eps} x {x}");
        assert_eq!(oracle.len(), frozen.len());
        for ((g, o), f) in got.iter().zip(&oracle).zip(frozen) {
            assert_abs_diff_eq!(g.y, *o, epsilon = 1e-11);
            assert_abs_diff_eq!(g.y, *f, epsilon = 1e-11);
            let stable = fam.dy(x, g.y) < 1.0;
            assert_eq!(g.stability == Stability::Stable, stable);
        }
    }
}

#[test]
fn unforced_pullbacks_are_the_outer_fixed_points() {
    let fam = ArctanFamily::new(1.1, 0.0).unwrap();
    let sys = BakerSystem::doubling();
    let y_star = 0.517513387125962;
    let up = pullback_graph(&fam, &sys, GraphKind::Upper, 64, 200, 0.86, Sampling::for_grid(64, 3)).unwrap();
    let lo = pullback_graph(&fam, &sys, GraphKind::Lower, 64, 200, 0.86, Sampling::for_grid(64, 3)).unwrap();
    for (u, l) in up.values.iter().zip(&lo.values) {
        assert_abs_diff_eq!(*u, y_star, epsilon = 1e-12);
        assert_abs_diff_eq!(*l, -y_star, epsilon = 1e-12);
    }
}

#[test]
fn pressure_of_one_digit_potential() {
    // P = log(e^alpha + e^beta) for a potential reading only the first digit
    let sys = BakerSystem::doubling();
    for n in [1, 3, 8] {
        let psi: Vec<f64> = (0..1usize << n).map(|w| if w >> (n - 1) == 0 { -0.2 } else { 0.8 }).collect();
        let m = PressureModel::from_potential(&sys, n, psi.clone()).unwrap();
        assert_abs_diff_eq!(pressure_eval(&m, &psi).unwrap(), 1.1132616875182229, epsilon = 1e-11);
    }
}

#[test]
fn pressure_of_two_digit_potential_matches_two_by_two_eigenvalue() {
    // order 2 on the golden-mean-like weights: leading root of
    // l^2 - (e00 + e11) l + (e00 e11 - e01 e10) = 0
    let sys = BakerSystem::doubling();
    let psi = [0.3, -0.7, 0.1, -0.2];
    let e: Vec<f64> = psi.iter().map(|v: &f64| v.exp()).collect();
    let (tr, det) = (e[0] + e[3], e[0] * e[3] - e[1] * e[2]);
    let lead = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
    let m = PressureModel::from_potential(&sys, 2, psi.to_vec()).unwrap();
    assert_abs_diff_eq!(pressure_eval(&m, &psi).unwrap(), lead.ln(), epsilon = 1e-11);
}

#[test]
fn min_cycle_mean_matches_enumeration_of_short_cycles() {
    // on order 3 every simple cycle of the de Bruijn graph has length <= 4
    let psi = [0.5, -0.1, 0.7, 0.2, 0.9, -0.4, 0.3, 0.6];
    let mut best = f64::INFINITY;
    for len in 1..=4usize {
        for word in 0..1usize << len {
            let digit = |i: usize| (word >> (len - 1 - (i % len))) & 1;
            let total: f64 = (0..len).map(|i| psi[(digit(i) << 2) | (digit(i + 1) << 1) | digit(i + 2)]).sum();
            best = best.min(total / len as f64);
        }
    }
    assert_abs_diff_eq!(min_cycle_mean(3, &psi), best, epsilon = 1e-12);
}

#[test]
fn rational_digits_are_the_binary_expansion() {
    assert_eq!(rational_digits(1, 3, 6), vec![0, 1, 0, 1, 0, 1]);
    assert_eq!(rational_digits(5, 7, 6), vec![1, 0, 1, 1, 0, 1]);
    let sys = BakerSystem::doubling();
    let pts = sys.periodic_points(3).unwrap();
    let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
    assert_eq!(xs, (0..7).map(|k| k as f64 / 7.0).collect::<Vec<_>>());
}
