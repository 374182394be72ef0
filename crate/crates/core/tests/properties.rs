use proptest::prelude::*;

use skewprod::baker::{BakerSystem, SymbolSeq};
use skewprod::dimension::{markov, pressure_eval, PressureModel};
use skewprod::fibre::{ArctanFamily, ComposedMap, FibreFamily, IntervalMap};
use skewprod::graphs::{middle_graph, pullback_graph, GraphKind, Sampling};
use skewprod::grid::Interval;
use skewprod::rng::stream;

const J: Interval = Interval { lo: -0.86, hi: 0.86 };

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn baker_inverse_undoes_forward(a in 0.2f64..0.8, xi in 0.0f64..1.0, x in 0.0f64..1.0) {
        let sys = BakerSystem::new(a).unwrap();
        let (u, v) = sys.forward(xi, x);
        let (p, q) = sys.inverse(u, v);
        prop_assert!((p - xi).abs() < 1e-12 && (q - x).abs() < 1e-12);
    }

    #[test]
    fn digit_windows_round_trip(word in prop::collection::vec(0u8..2, 60..80), shift in 0usize..8) {
        let sys = BakerSystem::doubling();
        let seq = SymbolSeq::from_parts(&word, &word);
        let moved = seq.shifted(shift as isize).unwrap().shifted(-(shift as isize)).unwrap();
        prop_assert_eq!(moved.future(), seq.future());
        // x after one step is the image of x under the inverse branch of xi_0
        let one = seq.shifted(1).unwrap();
        let expect = sys.inverse_branch(seq.future_digit(0), seq.x(&sys));
        prop_assert!((one.x(&sys) - expect).abs() < 1e-15);
    }

    #[test]
    fn closed_form_inverse(eps in -0.1f64..0.1, x in 0.0f64..1.0, y in -0.85f64..0.85) {
        let fam = ArctanFamily::new(1.1, eps).unwrap();
        let z = fam.value(x, y);
        let back = fam.inverse(x, z, J).unwrap();
        prop_assert!((back - y).abs() < 1e-12);
    }

    #[test]
    fn composed_jet_matches_finite_differences(eps in 0.0f64..0.1, xs in prop::collection::vec(0.0f64..1.0, 1..5), y in -0.5f64..0.5) {
        let fam = ArctanFamily::new(1.1, eps).unwrap();
        let map = ComposedMap { fam: &fam, xs };
        let (_, d1, d2) = map.jet(y);
        let h = 1e-4;
        let (p, m, c) = (map.jet(y + h).0, map.jet(y - h).0, map.jet(y).0);
        prop_assert!((d1 - (p - m) / (2.0 * h)).abs() < 1e-7);
        prop_assert!((d2 - (p - 2.0 * c + m) / (h * h)).abs() < 1e-4);
    }

    #[test]
    fn pressure_shifts_with_constants(seed in 0u64..1000, c in -2.0f64..2.0) {
        use rand::Rng;
        let sys = BakerSystem::doubling();
        let mut rng = stream(seed, 0);
        let psi: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = PressureModel::from_potential(&sys, 6, psi.clone()).unwrap();
        let shifted: Vec<f64> = psi.iter().map(|v| v + c).collect();
        let d = pressure_eval(&m, &shifted).unwrap() - pressure_eval(&m, &psi).unwrap();
        prop_assert!((d - c).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Three points on a line through potential space.
    #[test]
    fn pressure_is_convex(seed in 0u64..100_000, t in 0.05f64..0.95) {
        use rand::Rng;
        let sys = BakerSystem::doubling();
        let mut rng = stream(seed, 1);
        let base: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dir: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = PressureModel::from_potential(&sys, 5, base.clone()).unwrap();
        let at = |q: f64| {
            let pot: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + q * d).collect();
            pressure_eval(&m, &pot).unwrap()
        };
        let (q1, q3) = (-2.0, 3.0);
        let q2 = q1 + t * (q3 - q1);
        prop_assert!(at(q2) <= (1.0 - t) * at(q1) + t * at(q3) + 1e-10);
    }
}

#[test]
fn graphs_are_ordered() {
    let sys = BakerSystem::doubling();
    for eps in [0.018, 0.019, 0.04] {
        let fam = ArctanFamily::new(1.1, eps).unwrap();
        let n = 512;
        let up = pullback_graph(&fam, &sys, GraphKind::Upper, n, 200, 0.86, Sampling::for_grid(n, 5)).unwrap();
        let lo = pullback_graph(&fam, &sys, GraphKind::Lower, n, 200, 0.86, Sampling::for_grid(n, 5)).unwrap();
        let xi: Vec<u8> = skewprod::baker::random_digits(0.5, 2400, &mut stream(5, 9));
        let mid = middle_graph(&fam, &sys, &xi, n, 200, 0.0, J).unwrap();
        for k in 0..n {
            assert!(lo.values[k] <= up.values[k] + 1e-12);
            if mid.escapes[k] == skewprod::graphs::Escape::None {
                let x = mid.xs[k];
                assert!(mid.values[k] <= up.interp(x) + 1e-9 && mid.values[k] >= lo.interp(x) - 1e-9, "eps {eps} x {x}");
            }
        }
    }
}

#[test]
fn rohlin_identity_at_several_orders() {
    for a in [0.5, 0.3, 0.65] {
        let sys = BakerSystem::new(a).unwrap();
        let h = -a * a.ln() - (1.0 - a) * (1.0 - a).ln();
        for n in [2, 6, 10] {
            let p = markov::lebesgue_blocks(&sys, n);
            assert!((markov::block_entropy(n, &p) - h).abs() < 1e-10);
            let m = PressureModel::constant(&sys, n, 0.0).unwrap();
            let lyap: f64 = p.iter().zip(&m.log_tau_prime).map(|(a, b)| a * b).sum();
            assert!((lyap - h).abs() < 1e-10);
        }
    }
}
