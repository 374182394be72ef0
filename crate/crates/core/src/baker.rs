//! Generalized baker map and its symbolic coding.
//!
//! `T(xi, x) = (tau(xi), a x)` for `xi < a` and `(tau(xi), a + (1 - a) x)`
//! otherwise.  `tau` expands each branch onto `[0, 1)`; its inverse branches
//! are `G_0(z) = a z` and `G_1(z) = a + (1 - a) z`.
//!
//! Floating point orbits of an expanding map lose one bit per step, so points
//! of the square are carried symbolically as a window of a bi-infinite 0/1
//! sequence (`SymbolSeq`).  Coordinates are recovered by composing the
//! contracting inverse branches, which is stable.

use rand::Rng;

use crate::error::{Error, Result};

/// Largest period accepted by `periodic_points`.
pub const MAX_PERIOD: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BakerSystem {
    a: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicPoint {
    pub x: f64,
    /// Itinerary of `x` over one period.
    pub word: Vec<u8>,
    pub minimal_period: usize,
}

impl BakerSystem {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter(format!("split point a={a} must lie in (0, 1)")));
        }
        Ok(BakerSystem { a })
    }

    pub fn doubling() -> Self {
        BakerSystem { a: 0.5 }
    }

    pub fn split(&self) -> f64 {
        self.a
    }

    pub fn is_doubling(&self) -> bool {
        self.a == 0.5
    }

    pub fn branch(&self, v: f64) -> u8 {
        u8::from(v >= self.a)
    }

    pub fn tau(&self, x: f64) -> f64 {
        let r = if x < self.a { x / self.a } else { (x - self.a) / (1.0 - self.a) };
        if r >= 1.0 { 0.0 } else { r }
    }

    pub fn slope_of_digit(&self, d: u8) -> f64 {
        if d == 0 { self.a } else { 1.0 - self.a }
    }

    /// Derivative of `tau` at `x`.
    pub fn tau_prime(&self, x: f64) -> f64 {
        1.0 / self.slope_of_digit(self.branch(x))
    }

    /// Contraction of the stable direction, `1 / tau'(xi)`.
    pub fn sigma(&self, xi: f64) -> f64 {
        self.slope_of_digit(self.branch(xi))
    }

    pub fn max_contraction(&self) -> f64 {
        self.a.max(1.0 - self.a)
    }

    /// Inverse branch `G_d`.
    pub fn inverse_branch(&self, d: u8, z: f64) -> f64 {
        if d == 0 { self.a * z } else { self.a + (1.0 - self.a) * z }
    }

    pub fn forward(&self, xi: f64, x: f64) -> (f64, f64) {
        (self.tau(xi), self.inverse_branch(self.branch(xi), x))
    }

    pub fn inverse(&self, xi: f64, x: f64) -> (f64, f64) {
        let d = self.branch(x);
        (self.inverse_branch(d, xi), self.tau(x))
    }

    /// Number of digits after which a truncated itinerary pins the point
    /// down to double precision.
    pub fn guard_len(&self) -> usize {
        (1e-17f64.ln() / self.max_contraction().ln()).ceil() as usize
    }

    /// First `count` digits of `x` by iterating `tau`.  Exact for the
    /// doubling map as long as `count` stays below the mantissa width.
    pub fn digits_of(&self, x: f64, count: usize) -> Vec<u8> {
        let mut v = x;
        (0..count)
            .map(|_| {
                let d = self.branch(v);
                v = self.tau(v);
                d
            })
            .collect()
    }

    /// `G_{d_0} o G_{d_1} o ... (1/2)`.
    pub fn value_of_digits(&self, digits: &[u8]) -> f64 {
        digits.iter().rev().fold(0.5, |z, &d| self.inverse_branch(d, z))
    }

    /// Points of exact period dividing `p`, sorted.  For `a = 1/2` these are
    /// the rationals `k / (2^p - 1)`; otherwise each branch word gives an
    /// affine fixed-point equation that is solved directly.
    pub fn periodic_points(&self, p: usize) -> Result<Vec<PeriodicPoint>> {
        if p == 0 {
            return Err(Error::InvalidParameter("period must be positive".into()));
        }
        if p > MAX_PERIOD {
            return Err(Error::PeriodTooLarge(p));
        }
        let count = (1u64 << p) - 1;
        let mut out = Vec::with_capacity(count as usize);
        for k in 0..count {
            let word: Vec<u8> = (0..p).map(|j| ((k >> (p - 1 - j)) & 1) as u8).collect();
            let x = if self.is_doubling() {
                k as f64 / count as f64
            } else {
                let (mut alpha, mut beta) = (1.0, 0.0);
                for &d in word.iter().rev() {
                    let s = self.slope_of_digit(d);
                    let c = if d == 0 { 0.0 } else { self.a };
                    alpha *= s;
                    beta = s * beta + c;
                }
                beta / (1.0 - alpha)
            };
            let minimal_period = minimal_period(&word);
            out.push(PeriodicPoint { x, word, minimal_period });
        }
        out.sort_by(|a, b| a.x.total_cmp(&b.x));
        Ok(out)
    }
}

pub fn minimal_period(word: &[u8]) -> usize {
    let p = word.len();
    (1..=p).find(|&d| p % d == 0 && (0..p).all(|j| word[j] == word[j % d])).unwrap_or(p)
}

/// Binary digits of the rational `num / den` in `[0, 1)`, exactly.
pub fn rational_digits(num: u64, den: u64, count: usize) -> Vec<u8> {
    assert!(den > 0 && num < den, "need 0 <= num < den");
    let mut r = num as u128;
    let q = den as u128;
    (0..count)
        .map(|_| {
            r *= 2;
            let d = (r >= q) as u8;
            if d == 1 {
                r -= q;
            }
            d
        })
        .collect()
}

/// A finite window of a bi-infinite digit sequence with a marked origin.
///
/// Digits at and after the origin are the itinerary of `xi` under `tau`;
/// digits before it, read backwards, are the itinerary of `x`.  Applying `T`
/// moves the origin one step to the right.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolSeq {
    symbols: Vec<u8>,
    origin: usize,
}

impl SymbolSeq {
    /// `past[j]` is digit `j` of `x`, `future[j]` digit `j` of `xi`.
    pub fn from_parts(past: &[u8], future: &[u8]) -> Self {
        let mut symbols: Vec<u8> = past.iter().rev().copied().collect();
        symbols.extend_from_slice(future);
        SymbolSeq { symbols, origin: past.len() }
    }

    /// Digits drawn independently, 0 with probability `a`.  This is the
    /// coding of Lebesgue measure on the square.
    pub fn random<R: Rng + ?Sized>(sys: &BakerSystem, past_len: usize, future_len: usize, rng: &mut R) -> Self {
        let past = random_digits(sys.split(), past_len, rng);
        let future = random_digits(sys.split(), future_len, rng);
        SymbolSeq::from_parts(&past, &future)
    }

    /// The `T`-periodic point whose future repeats `word`.
    pub fn periodic(word: &[u8], past_len: usize, future_len: usize) -> Self {
        let p = word.len();
        let past: Vec<u8> = (0..past_len).map(|j| word[p - 1 - (j % p)]).collect();
        let future: Vec<u8> = (0..future_len).map(|i| word[i % p]).collect();
        SymbolSeq::from_parts(&past, &future)
    }

    /// The `T`-periodic point whose `x` has the periodic itinerary `word`.
    pub fn periodic_past(word: &[u8], past_len: usize, future_len: usize) -> Self {
        let p = word.len();
        let past: Vec<u8> = (0..past_len).map(|j| word[j % p]).collect();
        let future: Vec<u8> = (0..future_len).map(|i| word[p - 1 - (i % p)]).collect();
        SymbolSeq::from_parts(&past, &future)
    }

    /// A point whose `x` agrees with `x` to `resolved` digits and continues
    /// with random digits.
    pub fn with_resolved_x<R: Rng + ?Sized>(
        sys: &BakerSystem,
        x: f64,
        resolved: usize,
        past_len: usize,
        future: &[u8],
        rng: &mut R,
    ) -> Self {
        let mut past = sys.digits_of(x, resolved.min(past_len));
        past.extend(random_digits(sys.split(), past_len.saturating_sub(resolved), rng));
        SymbolSeq::from_parts(&past, future)
    }

    pub fn past_len(&self) -> usize {
        self.origin
    }

    pub fn future_len(&self) -> usize {
        self.symbols.len() - self.origin
    }

    pub fn past_digit(&self, j: usize) -> u8 {
        self.symbols[self.origin - 1 - j]
    }

    pub fn future_digit(&self, j: usize) -> u8 {
        self.symbols[self.origin + j]
    }

    pub fn future(&self) -> &[u8] {
        &self.symbols[self.origin..]
    }

    pub fn past(&self) -> Vec<u8> {
        self.symbols[..self.origin].iter().rev().copied().collect()
    }

    /// `T^n` of this point (`n` may be negative).
    pub fn shifted(&self, n: isize) -> Result<Self> {
        let o = self.origin as isize + n;
        if o < 0 || o > self.symbols.len() as isize {
            return Err(Error::InvalidParameter(format!("shift {n} runs off the symbol window")));
        }
        Ok(SymbolSeq { symbols: self.symbols.clone(), origin: o as usize })
    }

    pub fn xi(&self, sys: &BakerSystem) -> f64 {
        self.symbols[self.origin..].iter().rev().fold(0.5, |z, &d| sys.inverse_branch(d, z))
    }

    pub fn x(&self, sys: &BakerSystem) -> f64 {
        self.symbols[..self.origin].iter().fold(0.5, |z, &d| sys.inverse_branch(d, z))
    }

    /// `tau^j x` for `j = 0..=k`.
    pub fn backward_x_orbit(&self, sys: &BakerSystem, k: usize) -> Result<Vec<f64>> {
        let need = k + sys.guard_len();
        if self.origin < need {
            return Err(Error::InvalidParameter(format!(
                "itinerary of x has {} digits, depth {k} needs {need}",
                self.origin
            )));
        }
        let mut out = vec![0.0; k + 1];
        let mut z = 0.5;
        for j in (0..self.origin).rev() {
            z = sys.inverse_branch(self.past_digit(j), z);
            if j <= k {
                out[j] = z;
            }
        }
        Ok(out)
    }

    /// Second coordinates `x_0..=x_n` of the forward orbit `T^j(xi, x)`.
    pub fn forward_x_orbit(&self, sys: &BakerSystem, n: usize) -> Result<Vec<f64>> {
        if self.future_len() < n {
            return Err(Error::InvalidParameter(format!(
                "itinerary of xi has {} digits, {n} steps requested",
                self.future_len()
            )));
        }
        let mut out = Vec::with_capacity(n + 1);
        let mut x = self.x(sys);
        out.push(x);
        for j in 0..n {
            x = sys.inverse_branch(self.future_digit(j), x);
            out.push(x);
        }
        Ok(out)
    }
}

pub fn random_digits<R: Rng + ?Sized>(a: f64, n: usize, rng: &mut R) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.gen::<f64>() >= a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn period_two_points_of_doubling() {
        let pts = BakerSystem::doubling().periodic_points(2).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(pts[0].minimal_period, 1);
        assert_eq!(pts[1].minimal_period, 2);
    }

    #[test]
    fn general_split_periodic_points_are_periodic() {
        let sys = BakerSystem::new(0.37).unwrap();
        for p in 1..=6 {
            let pts = sys.periodic_points(p).unwrap();
            assert_eq!(pts.len(), (1 << p) - 1);
            for pt in &pts {
                let mut y = pt.x;
                for _ in 0..p {
                    y = sys.tau(y);
                }
                assert!((y - pt.x).abs() < 1e-12, "p={p} x={} tau^p={y}", pt.x);
            }
        }
    }

    #[test]
    fn huge_period_rejected() {
        assert!(matches!(BakerSystem::doubling().periodic_points(40), Err(Error::PeriodTooLarge(40))));
    }

    #[test]
    fn rational_digits_of_thirds() {
        assert_eq!(rational_digits(1, 3, 6), vec![0, 1, 0, 1, 0, 1]);
        assert_eq!(rational_digits(2, 3, 4), vec![1, 0, 1, 0]);
    }

    #[test]
    fn symbol_shift_is_baker_map() {
        let sys = BakerSystem::new(0.4).unwrap();
        let mut rng = stream(7, 0);
        let s = SymbolSeq::random(&sys, 120, 120, &mut rng);
        let t = s.shifted(1).unwrap();
        let (xi1, x1) = sys.forward(s.xi(&sys), s.x(&sys));
        assert!((t.xi(&sys) - xi1).abs() < 1e-12);
        assert!((t.x(&sys) - x1).abs() < 1e-12);
    }

    #[test]
    fn periodic_symbols_match_points() {
        let sys = BakerSystem::doubling();
        let s = SymbolSeq::periodic(&[0, 1], 80, 80);
        assert!((s.xi(&sys) - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.x(&sys) - 2.0 / 3.0).abs() < 1e-15);
        let s = SymbolSeq::periodic_past(&[0, 1], 80, 80);
        assert!((s.x(&sys) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.shifted(2).unwrap().x(&sys), s.x(&sys));
    }

    #[test]
    fn backward_orbit_is_tau_orbit() {
        let sys = BakerSystem::doubling();
        let past = rational_digits(5, 7, 200);
        let s = SymbolSeq::from_parts(&past, &[]);
        let orb = s.backward_x_orbit(&sys, 6).unwrap();
        let expect = [5.0 / 7.0, 3.0 / 7.0, 6.0 / 7.0, 5.0 / 7.0, 3.0 / 7.0, 6.0 / 7.0, 5.0 / 7.0];
        for (a, b) in orb.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
