//! The two-branch intermittent map, its inverse branches, the renewal
//! partition near the neutral fixed point and D_n cylinders.

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub gamma: f64,
}

impl MapParams {
    /// Accepts `0 < gamma <= 1`.
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Domain(format!("gamma must lie in (0,1], got {gamma}")));
        }
        Ok(MapParams { gamma })
    }

    /// Thermodynamic computations need `gamma < 1`.
    pub fn thermo(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Domain(format!("gamma must lie in (0,1) here, got {gamma}")));
        }
        Ok(MapParams { gamma })
    }

    /// The constant 2^gamma of the left branch.
    #[inline]
    pub fn c(&self) -> f64 {
        self.gamma.exp2()
    }

    /// Left preimage of 1/2.
    pub fn a_gamma(&self) -> f64 {
        left_inverse(*self, 0.5)
    }

    /// Exponent of the renewal tail |J_n| ~ n^{-(1+1/gamma)}.
    pub fn tail_exponent(&self) -> f64 {
        1.0 + 1.0 / self.gamma
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    L,
    R,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::L => "L",
            Branch::R => "R",
        })
    }
}

pub fn parse_word(s: &str) -> Result<Vec<Branch>> {
    s.chars()
        .map(|c| match c {
            'L' | 'l' | '0' => Ok(Branch::L),
            'R' | 'r' | '1' => Ok(Branch::R),
            _ => Err(Error::Invalid(format!("bad symbol {c:?} in word {s:?}"))),
        })
        .collect()
}

pub fn word_string(w: &[Branch]) -> String {
    w.iter().map(|b| b.to_string()).collect()
}

#[inline]
pub fn left_map(p: MapParams, x: f64) -> f64 {
    x * (1.0 + p.c() * x.powf(p.gamma))
}

#[inline]
pub fn left_deriv(p: MapParams, x: f64) -> f64 {
    1.0 + (1.0 + p.gamma) * p.c() * x.powf(p.gamma)
}

#[inline]
pub fn log_left_deriv(p: MapParams, x: f64) -> f64 {
    ((1.0 + p.gamma) * p.c() * x.powf(p.gamma)).ln_1p()
}

pub fn branch_of(x: f64) -> Branch {
    if x < 0.5 {
        Branch::L
    } else {
        Branch::R
    }
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("point {x} outside [0,1]")));
    }
    Ok(())
}

pub fn eval_map(p: MapParams, x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(match branch_of(x) {
        Branch::L => left_map(p, x),
        Branch::R => 2.0 * x - 1.0,
    })
}

/// Derivative; at exactly 1/2 the right branch is used.
pub fn eval_deriv(p: MapParams, x: f64) -> Result<f64> {
    check_unit(x)?;
    Ok(match branch_of(x) {
        Branch::L => left_deriv(p, x),
        Branch::R => 2.0,
    })
}

/// Derivative on a named branch, so that 1/2 can be approached from the left.
pub fn deriv_on(p: MapParams, b: Branch, x: f64) -> f64 {
    match b {
        Branch::L => left_deriv(p, x),
        Branch::R => 2.0,
    }
}

pub fn log_deriv_on(p: MapParams, b: Branch, x: f64) -> f64 {
    match b {
        Branch::L => log_left_deriv(p, x),
        Branch::R => std::f64::consts::LN_2,
    }
}

/// Left inverse branch. Newton from the right converges monotonically since the
/// branch is convex; the iteration stops once it no longer decreases.
pub(crate) fn left_inverse(p: MapParams, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let mut x = y.min(0.5);
    for _ in 0..100 {
        let g = left_map(p, x) - y;
        let next = x - g / left_deriv(p, x);
        if !(next < x) || next <= 0.0 {
            break;
        }
        let done = x - next <= 1e-16 * next;
        x = next;
        if done {
            break;
        }
    }
    x
}

pub fn inverse_branch(p: MapParams, b: Branch, y: f64) -> Result<f64> {
    check_unit(y)?;
    Ok(match b {
        Branch::R => 0.5 * (y + 1.0),
        Branch::L => {
            let x = left_inverse(p, y);
            let r = left_map(p, x) - y;
            if r.abs() > 1e-14 * (1.0 + y) * 4.0 {
                return Err(Error::NoConvergence(format!("left inverse of {y}: residual {r}")));
            }
            x
        }
    })
}

/// Solves `f_L(base + d) - f_L(base) = target` for `d >= 0` without forming the
/// difference of two nearly equal numbers. Used to track offsets inside J_k.
pub fn left_offset_inverse(p: MapParams, base: f64, target: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let g = p.gamma;
    let c = p.c();
    let b1g = base.powf(1.0 + g);
    let diff = |d: f64| -> f64 {
        let incr = if base > 0.0 { b1g * ((1.0 + g) * (d / base).ln_1p()).exp_m1() } else { d.powf(1.0 + g) };
        d + c * incr
    };
    let mut d = target / left_deriv(p, base);
    for _ in 0..100 {
        let r = diff(d) - target;
        let next = d - r / left_deriv(p, base + d);
        if !(next < d) || next < 0.0 {
            break;
        }
        let done = d - next <= 1e-16 * next;
        d = next;
        if done {
            break;
        }
    }
    d
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RenewalPartition {
    pub gamma: f64,
    /// ell[0] = 1/2 > ell[1] > ... > ell[N]
    pub ell: Vec<f64>,
    /// len[n] = |J_n| = ell[n-1] - ell[n] for n >= 1; len[0] = 1/2 by convention.
    pub len: Vec<f64>,
}

impl RenewalPartition {
    pub fn depth(&self) -> usize {
        self.ell.len() - 1
    }

    /// J_n = [ell_n, ell_{n-1}).
    pub fn cell(&self, n: usize) -> (f64, f64) {
        assert!(n >= 1);
        (self.ell[n], self.ell[n - 1])
    }

    /// Y_n = (J_n + 1)/2 for n >= 1, and Y_0 = [3/4, 1].
    pub fn y_cell(&self, n: usize) -> (f64, f64) {
        if n == 0 {
            (0.75, 1.0)
        } else {
            let (a, b) = self.cell(n);
            (0.5 * (a + 1.0), 0.5 * (b + 1.0))
        }
    }

    /// Index n with x in J_n, for 0 < x < 1/2.
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(x > 0.0 && x < 0.5) {
            return None;
        }
        // ell is decreasing; find first n with ell[n] <= x
        let n = self.ell.partition_point(|&e| e > x);
        if n >= self.ell.len() {
            None
        } else {
            Some(n)
        }
    }
}

/// ell_n by repeated left inversion; |J_n| = 2^gamma ell_n^{1+gamma} avoids cancellation.
pub fn renewal_endpoints(p: MapParams, n: usize) -> Result<RenewalPartition> {
    if n < 1 {
        return Err(Error::Invalid("renewal depth must be at least 1".into()));
    }
    let mut ell = Vec::with_capacity(n + 1);
    let mut len = Vec::with_capacity(n + 1);
    ell.push(0.5);
    len.push(0.5);
    for k in 1..=n {
        let prev = ell[k - 1];
        let e = left_inverse(p, prev);
        if !(e > 0.0 && e < prev) {
            return Err(Error::NoConvergence(format!("renewal endpoint {k} not decreasing")));
        }
        ell.push(e);
        len.push(p.c() * e.powf(1.0 + p.gamma));
    }
    Ok(RenewalPartition { gamma: p.gamma, ell, len })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub word: Vec<Branch>,
    pub lo: f64,
    pub hi: f64,
    pub depth: usize,
}

impl Cylinder {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x < self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

/// Applies the inverse branches of `word` right-to-left to a point of [0,1].
pub fn pull_back(p: MapParams, word: &[Branch], y: f64) -> f64 {
    word.iter().rev().fold(y, |acc, &b| match b {
        Branch::R => 0.5 * (acc + 1.0),
        Branch::L => left_inverse(p, acc),
    })
}

pub fn cylinder_realize(p: MapParams, word: &[Branch]) -> Result<Cylinder> {
    if word.is_empty() {
        return Err(Error::Invalid("empty cylinder word".into()));
    }
    let lo = pull_back(p, word, 0.0);
    let hi = pull_back(p, word, 1.0);
    if !(hi > lo) {
        return Err(Error::Invalid(format!("empty cylinder {}", word_string(word))));
    }
    Ok(Cylinder { word: word.to_vec(), lo, hi, depth: word.len() })
}

/// Itinerary of x for n steps.
pub fn itinerary(p: MapParams, x: f64, n: usize) -> Vec<Branch> {
    let mut out = Vec::with_capacity(n);
    let mut y = x;
    for _ in 0..n {
        let b = branch_of(y);
        out.push(b);
        y = match b {
            Branch::L => left_map(p, y),
            Branch::R => 2.0 * y - 1.0,
        }
        .clamp(0.0, 1.0);
    }
    out
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// S_n log Df(x) along the forward orbit.
pub fn birkhoff_log_deriv(p: MapParams, x: f64, n: usize) -> Result<f64> {
    check_unit(x)?;
    let mut acc = KahanSum::default();
    let mut y = x;
    for _ in 0..n {
        let b = branch_of(y);
        acc.add(log_deriv_on(p, b, y));
        y = match b {
            Branch::L => left_map(p, y),
            Branch::R => 2.0 * y - 1.0,
        }
        .clamp(0.0, 1.0);
    }
    Ok(acc.value())
}

/// log Df^n at the two endpoints of the cylinder of `word`. log Df^n is
/// nondecreasing on every D_n cylinder, so these are its extreme values.
pub fn cylinder_log_deriv_range(p: MapParams, word: &[Branch]) -> (f64, f64) {
    let mut lo_pt = 0.0;
    let mut hi_pt = 1.0;
    let mut s_lo = KahanSum::default();
    let mut s_hi = KahanSum::default();
    for &b in word.iter().rev() {
        match b {
            Branch::R => {
                lo_pt = 0.5 * (lo_pt + 1.0);
                hi_pt = 0.5 * (hi_pt + 1.0);
            }
            Branch::L => {
                lo_pt = left_inverse(p, lo_pt);
                hi_pt = left_inverse(p, hi_pt);
            }
        }
        s_lo.add(log_deriv_on(p, b, lo_pt));
        s_hi.add(log_deriv_on(p, b, hi_pt));
    }
    (s_lo.value(), s_hi.value())
}

/// V_n: largest normalized log-derivative oscillation over D_n cylinders. All
/// cylinders are used when 2^n <= samples, otherwise a seeded sample plus the
/// words that start with long runs of L (where the oscillation peaks).
pub fn distortion_estimate(p: MapParams, n: usize, samples: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Invalid("distortion depth must be positive".into()));
    }
    let mut words: Vec<Vec<Branch>> = Vec::new();
    if n < 63 && (1usize << n) <= samples.max(1) {
        for code in 0..(1usize << n) {
            words.push((0..n).map(|i| if code >> i & 1 == 1 { Branch::R } else { Branch::L }).collect());
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        for _ in 0..samples {
            words.push((0..n).map(|_| if rng.gen::<bool>() { Branch::R } else { Branch::L }).collect());
        }
        for k in 0..=n {
            let mut w = vec![Branch::L; k];
            w.extend(std::iter::repeat(Branch::R).take(n - k));
            words.push(w.clone());
            if k < n {
                w[k] = Branch::R;
                for s in w.iter_mut().skip(k + 1) {
                    *s = Branch::L;
                }
                words.push(w);
            }
        }
    }
    let mut v: f64 = 0.0;
    for w in &words {
        let (a, b) = cylinder_log_deriv_range(p, w);
        v = v.max((b - a).abs() / n as f64);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(g: f64) -> MapParams {
        MapParams::new(g).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_map(p(1.0), 0.0).unwrap(), 0.0);
        assert!((eval_map(p(1.0), 0.25).unwrap() - 0.375).abs() < 1e-15);
        let a1 = (5f64.sqrt() - 1.0) / 4.0;
        assert!((eval_map(p(1.0), a1).unwrap() - 0.5).abs() < 1e-15);
        assert!(eval_map(p(0.5), 1.5).is_err());
    }

    #[test]
    fn deriv_examples() {
        assert_eq!(eval_deriv(p(0.3), 0.0).unwrap(), 1.0);
        assert!((eval_deriv(p(1.0), 0.25).unwrap() - 2.0).abs() < 1e-15);
        let a1 = (5f64.sqrt() - 1.0) / 4.0;
        assert!((eval_deriv(p(1.0), a1).unwrap() - 5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(inverse_branch(p(1.0), Branch::R, 0.5).unwrap(), 0.75);
        let a1 = (5f64.sqrt() - 1.0) / 4.0;
        assert!((inverse_branch(p(1.0), Branch::L, 0.5).unwrap() - a1).abs() < 1e-15);
        assert_eq!(inverse_branch(p(0.5), Branch::L, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn renewal_first_endpoint() {
        let r = renewal_endpoints(p(1.0), 1).unwrap();
        assert!((r.ell[1] - (5f64.sqrt() - 1.0) / 4.0).abs() < 1e-15);
        assert!(renewal_endpoints(p(1.0), 0).is_err());
    }

    #[test]
    fn offset_inverse_matches_direct() {
        let q = p(0.5);
        let r = renewal_endpoints(q, 30).unwrap();
        for k in [1usize, 5, 29] {
            let target = 0.3 * r.len[k];
            let d = left_offset_inverse(q, r.ell[k], target);
            let direct = left_inverse(q, r.ell[k - 1] + target) - r.ell[k];
            assert!((d - direct).abs() < 1e-13 * r.len[k] + 1e-17, "k={k}: {d} vs {direct}");
        }
    }

    #[test]
    fn cylinder_lr() {
        let c = cylinder_realize(p(1.0), &parse_word("LR").unwrap()).unwrap();
        let a1 = (5f64.sqrt() - 1.0) / 4.0;
        assert!((c.lo - a1).abs() < 1e-15 && (c.hi - 0.5).abs() < 1e-15);
        let r = cylinder_realize(p(1.0), &[Branch::R]).unwrap();
        assert_eq!((r.lo, r.hi), (0.5, 1.0));
    }

    #[test]
    fn birkhoff_examples() {
        let v = birkhoff_log_deriv(p(0.7), 0.9, 3).unwrap();
        assert!((v - 3.0 * std::f64::consts::LN_2).abs() < 1e-14);
        assert_eq!(birkhoff_log_deriv(p(0.7), 0.0, 10).unwrap(), 0.0);
    }

    #[test]
    fn distortion_first_level() {
        let q = p(0.5);
        let v1 = distortion_estimate(q, 1, 16).unwrap();
        // left cylinder: log Df ranges over [0, log(2+gamma)]
        assert!((v1 - 2.5f64.ln()).abs() < 1e-12);
    }
}
