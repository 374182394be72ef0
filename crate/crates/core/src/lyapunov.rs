//! Fibre Lyapunov exponents of points and of invariant measures on graphs.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baker::{BakerSystem, SymbolSeq};
use crate::error::{Error, Result};
use crate::fibre::{fixed_points_of, ComposedMap, FibreFamily, FixedPoint};
use crate::graphs::{middle_value, pullback_value, Escape, GraphGrid, GraphKind};
use crate::grid::Interval;
use crate::rng::{stream, Rng as StreamRng};

/// Number of batches behind the batch-means standard error.
const BATCHES: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentEstimate {
    pub value: f64,
    pub n: usize,
    /// Partial averages `(steps, average)` at `n/4, n/2, 3n/4, n`.
    pub tail_sequence: Vec<(usize, f64)>,
    pub stderr: f64,
    /// Last two checkpoints agree to `1e-3`.
    pub converged: bool,
    pub note: Option<String>,
}

impl ExponentEstimate {
    fn exact(value: f64, n: usize, note: Option<String>) -> Self {
        ExponentEstimate { value, n, tail_sequence: vec![(n, value); 3], stderr: 0.0, converged: true, note }
    }

    fn from_series(series: &[f64]) -> Self {
        let n = series.len();
        let mut checkpoints = Vec::with_capacity(4);
        let mut sum = 0.0;
        let marks = [n / 4, n / 2, 3 * n / 4, n];
        let mut next = 0;
        for (t, v) in series.iter().enumerate() {
            sum += v;
            while next < marks.len() && t + 1 == marks[next] {
                checkpoints.push((marks[next], sum / marks[next] as f64));
                next += 1;
            }
        }
        let value = sum / n as f64;
        let size = n / BATCHES;
        let means: Vec<f64> = (0..BATCHES).map(|b| series[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64).collect();
        let (_, var) = mean_var(&means);
        let converged = checkpoints.len() >= 2 && (checkpoints[checkpoints.len() - 2].1 - value).abs() <= 1e-3;
        ExponentEstimate { value, n, tail_sequence: checkpoints, stderr: (var / BATCHES as f64).sqrt(), converged, note: None }
    }

    fn from_samples(samples: &[f64], note: Option<String>) -> Self {
        let (m, var) = mean_var(samples);
        let n = samples.len();
        let q = |k: usize| samples[..k.max(1)].iter().sum::<f64>() / k.max(1) as f64;
        ExponentEstimate {
            value: m,
            n,
            tail_sequence: vec![(n / 4, q(n / 4)), (n / 2, q(n / 2)), (3 * n / 4, q(3 * n / 4)), (n, m)],
            stderr: (var / n as f64).sqrt(),
            converged: true,
            note,
        }
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var)
}

/// Invariant measures on the base, described by the law of the digits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeasureModel {
    /// Digits independent, `0` with probability `a`.
    Lebesgue,
    /// Digits independent, `1` with probability `p1`.
    Bernoulli { p1: f64 },
    /// Stationary chain: row `s` (the last `order` digits, oldest first as
    /// the high bit) gives the law of the next digit.
    Markov { order: usize, transition: Vec<[f64; 2]> },
    /// The periodic orbit whose `x` has itinerary `word` repeated.
    Periodic { word: Vec<u8> },
}

impl fmt::Display for MeasureModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureModel::Lebesgue => f.write_str("lebesgue"),
            MeasureModel::Bernoulli { p1 } => write!(f, "bernoulli({p1})"),
            MeasureModel::Markov { order, .. } => write!(f, "markov({order})"),
            MeasureModel::Periodic { word } => {
                f.write_str("periodic(")?;
                for d in word {
                    write!(f, "{d}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl MeasureModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            MeasureModel::Lebesgue => Ok(()),
            MeasureModel::Bernoulli { p1 } if !(0.0..=1.0).contains(p1) => bad("Bernoulli weight outside [0, 1]"),
            MeasureModel::Bernoulli { .. } => Ok(()),
            MeasureModel::Markov { order, transition } => {
                if *order == 0 || *order > 16 || transition.len() != 1 << order {
                    return bad("Markov model needs 1 <= order <= 16 and 2^order rows");
                }
                if transition.iter().any(|r| !(r[0] > 0.0 && r[1] > 0.0) || (r[0] + r[1] - 1.0).abs() > 1e-12) {
                    return bad("Markov rows must be positive and sum to one");
                }
                Ok(())
            }
            MeasureModel::Periodic { word } => {
                if word.is_empty() || word.iter().any(|&d| d > 1) || word.iter().all(|&d| d == 1) {
                    return bad("periodic word must be a nonempty 0/1 word other than all ones");
                }
                Ok(())
            }
        }
    }

    /// A point distributed according to the measure, as a symbol window.
    pub fn sample<R: Rng + ?Sized>(&self, sys: &BakerSystem, past_len: usize, future_len: usize, rng: &mut R) -> SymbolSeq {
        let total = past_len + future_len;
        let chain: Vec<u8> = match self {
            MeasureModel::Lebesgue => (0..total).map(|_| u8::from(rng.gen::<f64>() >= sys.split())).collect(),
            MeasureModel::Bernoulli { p1 } => (0..total).map(|_| u8::from(rng.gen::<f64>() < *p1)).collect(),
            MeasureModel::Markov { order, transition } => {
                let pi = stationary(*order, transition);
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut state = pi.len() - 1;
                for (s, w) in pi.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        state = s;
                        break;
                    }
                }
                let mask = (1usize << order) - 1;
                (0..total)
                    .map(|_| {
                        let d = u8::from(rng.gen::<f64>() >= transition[state][0]);
                        state = ((state << 1) | d as usize) & mask;
                        d
                    })
                    .collect()
            }
            MeasureModel::Periodic { word } => {
                let p = word.len();
                let phase = rng.gen_range(0..p);
                (0..total).map(|t| word[(t + phase) % p]).collect()
            }
        };
        // chain time runs along the itinerary of x; xi reads it backwards
        let future: Vec<u8> = (0..future_len).map(|i| chain[future_len - 1 - i]).collect();
        let past: Vec<u8> = chain[future_len..].to_vec();
        SymbolSeq::from_parts(&past, &future)
    }
}

fn stationary(order: usize, transition: &[[f64; 2]]) -> Vec<f64> {
    let n = 1usize << order;
    let mask = n - 1;
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..100_000 {
        let mut next = vec![0.0; n];
        for s in 0..n {
            for d in 0..2 {
                next[((s << 1) | d) & mask] += pi[s] * transition[s][d];
            }
        }
        let diff: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if diff < 1e-15 {
            break;
        }
    }
    pi
}

/// `(1/n) log (f^n_theta)'(y)` along the forward orbit of `point`.
pub fn forward_exponent<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    point: &SymbolSeq,
    y: f64,
    n: usize,
) -> Result<ExponentEstimate> {
    if n < 1000 {
        return Err(Error::InvalidParameter(format!("exponent estimates need n >= 1000, got {n}")));
    }
    if point.future_len() < n {
        return Err(Error::InvalidParameter(format!("{n} steps need {n} digits of xi")));
    }
    let mut series = Vec::with_capacity(n);
    let (mut x, mut y) = (point.x(sys), y);
    for &d in &point.future()[..n] {
        series.push(fam.dy(x, y).ln());
        y = fam.value(x, y);
        x = sys.inverse_branch(d, x);
    }
    Ok(ExponentEstimate::from_series(&series))
}

/// Birkhoff average of `log f'` along the orbit of `point` lifted to the
/// middle graph.  The graph values along the orbit come from one backward
/// sweep of inverse fibre maps started `depth` steps beyond the end.
pub fn middle_orbit_exponent<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    point: &SymbolSeq,
    n: usize,
    depth: usize,
    y0: f64,
    j: Interval,
) -> Result<ExponentEstimate> {
    if point.future_len() < n + depth {
        return Err(Error::InvalidParameter(format!("need {} digits of xi", n + depth)));
    }
    let xs = point.forward_x_orbit(sys, n + depth)?;
    let mut ys = vec![0.0; n];
    let mut y = y0;
    for m in (0..n + depth).rev() {
        y = fam.inverse(xs[m], y, j).ok_or(Error::FibreEscape { step: m, y, lo: j.lo, hi: j.hi })?;
        if m < n {
            ys[m] = y;
        }
    }
    let series: Vec<f64> = (0..n).map(|m| fam.dy(xs[m], ys[m]).ln()).collect();
    Ok(ExponentEstimate::from_series(&series))
}

/// Fixed points of the fibre map composed over the periodic orbit of the
/// point whose `x` has itinerary `word` repeated, together with the base
/// points `tau^j x`, `j = 1..=p`.
pub fn periodic_fixed_points<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    word: &[u8],
    bracket: Interval,
) -> Result<(Vec<FixedPoint>, Vec<f64>)> {
    let p = word.len();
    let seq = SymbolSeq::periodic_past(word, p + sys.guard_len() + 1, 0);
    let orbit = seq.backward_x_orbit(sys, p)?;
    // phi(x) = f_{tau x} o ... o f_{tau^p x}(phi(x)); the innermost map acts first
    let xs: Vec<f64> = (1..=p).rev().map(|j| orbit[j]).collect();
    let fps = fixed_points_of(&ComposedMap { fam, xs: xs.clone() }, bracket, 10_000, 1e-12)?;
    Ok((fps, xs))
}

/// `integral log f'_x(phi(x)) d mu` for the graph `graph`.
pub fn measure_exponent<F: FibreFamily + ?Sized>(
    fam: &F,
    sys: &BakerSystem,
    graph: &GraphGrid,
    mu: &MeasureModel,
    samples: usize,
    seed: u64,
) -> Result<ExponentEstimate> {
    mu.validate()?;
    match (mu, graph.kind) {
        (MeasureModel::Periodic { word }, kind) => {
            let bracket = graph.guard.unwrap_or(Interval { lo: -graph.anchor.abs(), hi: graph.anchor.abs() });
            let bracket = if kind == GraphKind::Middle { bracket } else { Interval { lo: -graph.anchor, hi: graph.anchor } };
            let (fps, _) = periodic_fixed_points(fam, sys, word, bracket)?;
            if fps.is_empty() {
                return Err(Error::NoConvergence { what: "periodic fixed point search".into(), iterations: 0 });
            }
            let (fp, note) = match kind {
                GraphKind::Upper => (fps[fps.len() - 1], None),
                GraphKind::Lower => (fps[0], None),
                GraphKind::Middle if fps.len() == 3 => (fps[1], None),
                GraphKind::Middle if fps.len() == 1 => (fps[0], Some("middle graph collapsed onto the pinched orbit".to_string())),
                GraphKind::Middle => {
                    let fp = *fps.iter().min_by(|a, b| (a.slope - 1.0).abs().total_cmp(&(b.slope - 1.0).abs())).unwrap();
                    (fp, Some("middle graph collapsed onto a neutral fixed point".to_string()))
                }
            };
            Ok(ExponentEstimate::exact(fp.slope.ln() / word.len() as f64, word.len(), note))
        }
        (MeasureModel::Lebesgue, GraphKind::Upper | GraphKind::Lower) => {
            let vals: Vec<f64> = graph.xs.iter().zip(&graph.values).map(|(&x, &v)| fam.dy(x, v).ln()).collect();
            Ok(ExponentEstimate::from_samples(&vals, None))
        }
        (_, kind) => {
            let depth = graph.depth;
            let j = graph.guard.unwrap_or(Interval { lo: -graph.anchor.abs(), hi: graph.anchor.abs() });
            let past_len = depth + sys.guard_len() + 2;
            let future_len = if kind == GraphKind::Middle { depth } else { 0 };
            let collapsed = std::sync::atomic::AtomicUsize::new(0);
            let vals: Vec<f64> = (0..samples)
                .into_par_iter()
                .map(|s| {
                    let mut rng: StreamRng = stream(seed, s as u64);
                    let p = mu.sample(sys, past_len, future_len, &mut rng);
                    let x = p.x(sys);
                    let v = match kind {
                        GraphKind::Middle => match middle_value(fam, sys, &p, depth, graph.anchor, j)? {
                            Ok(v) => v,
                            Err(e) => {
                                collapsed.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                                let k = if e == Escape::Up { GraphKind::Upper } else { GraphKind::Lower };
                                pullback_value(fam, sys, k, &p, depth, j.hi)?
                            }
                        },
                        k => pullback_value(fam, sys, k, &p, depth, graph.anchor)?,
                    };
                    Ok(fam.dy(x, v).ln())
                })
                .collect::<Result<Vec<f64>>>()?;
            let c = collapsed.into_inner();
            let note = (c > 0).then(|| format!("{c} of {samples} middle samples escaped and were read on the bounding graph"));
            Ok(ExponentEstimate::from_samples(&vals, note))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibre::ArctanFamily;
    use crate::graphs::{pullback_graph, Sampling};

    #[test]
    fn unforced_repeller_exponent() {
        let fam = ArctanFamily::new(1.1, 0.0).unwrap();
        let sys = BakerSystem::doubling();
        let p = SymbolSeq::random(&sys, 80, 5000, &mut stream(1, 0));
        let e = forward_exponent(&fam, &sys, &p, 0.0, 5000).unwrap();
        assert!((e.value - 1.1f64.ln()).abs() < 1e-12);
        assert_eq!(e.tail_sequence.len(), 4);
        assert!(e.converged);
    }

    #[test]
    fn periodic_measure_of_upper_graph_at_zero() {
        let fam = ArctanFamily::new(1.1, 0.04).unwrap();
        let sys = BakerSystem::doubling();
        let g = pullback_graph(&fam, &sys, GraphKind::Upper, 64, 100, 0.86, Sampling::for_grid(64, 3)).unwrap();
        let e = measure_exponent(&fam, &sys, &g, &MeasureModel::Periodic { word: vec![0] }, 0, 0).unwrap();
        let y = 0.687;
        assert!((e.value - fam.dy(0.0, y).ln()).abs() < 5e-3);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn markov_sampler_respects_model() {
        let sys = BakerSystem::doubling();
        let mu = MeasureModel::Markov { order: 1, transition: vec![[0.9, 0.1], [0.5, 0.5]] };
        mu.validate().unwrap();
        let s = mu.sample(&sys, 200_000, 0, &mut stream(2, 0));
        let ones = s.past().iter().filter(|&&d| d == 1).count() as f64 / 200_000.0;
        // stationary law: pi_1 = 0.1 / (0.1 + 0.5)
        assert!((ones - 1.0 / 6.0).abs() < 5e-3);
    }
}

impl std::str::FromStr for MeasureModel {
    type Err = Error;

    /// `lebesgue`, `bernoulli:<p1>` or `periodic:<word>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unknown measure '{s}'"));
        let (head, arg) = s.split_once(':').map_or((s, None), |(h, a)| (h, Some(a)));
        let m = match (head, arg) {
            ("lebesgue", None) => MeasureModel::Lebesgue,
            ("bernoulli", Some(p)) => MeasureModel::Bernoulli { p1: p.parse().map_err(|_| bad())? },
            ("periodic", Some(w)) => MeasureModel::Periodic {
                word: w.chars().map(|c| c.to_digit(2).map(|d| d as u8).ok_or_else(bad)).collect::<Result<_>>()?,
            },
            _ => return Err(bad()),
        };
        m.validate()?;
        Ok(m)
    }
}
