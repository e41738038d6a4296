//! Escape masses m_t(I^n), the set of points whose first n iterates avoid the
//! hole: by summing cylinder weights, and by integrating L^n 1.

use super::Tower;
use crate::error::{invalid, Error, Result};
use crate::holes::MarkovHole;
use crate::map_core::{left_inverse, log_left_deriv, Branch};
use crate::stats::{ls_rate_with_power, ls_slope};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EscapeOptions {
    /// Only count cylinders whose word starts with this prefix.
    pub start_prefix: Vec<Branch>,
    /// Stop after this many leaf cylinders per depth.
    pub word_budget: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapePoint {
    pub n: usize,
    pub mass: f64,
    /// Bounds from the extreme log-derivatives on each cylinder.
    pub lo: f64,
    pub hi: f64,
    pub cylinders: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EscapeReport {
    pub t: f64,
    pub p: f64,
    pub points: Vec<EscapePoint>,
    /// Least-squares slope of log mass over the last third of the depths.
    pub slope: f64,
    /// Rate from log mass = a + b n + c log n over the second half of the depths,
    /// for holes whose survivors decay with a power-law prefactor.
    pub slope_power_corrected: f64,
    pub budget_hit: bool,
}

struct Walk<'a> {
    hole: &'a MarkovHole,
    pr: crate::map_core::MapParams,
    t: f64,
    p: f64,
    look: usize,
    buf: Vec<Branch>,
    prefix: &'a [Branch],
    mass: f64,
    lo: f64,
    hi: f64,
    count: u64,
    budget: u64,
    hit: bool,
}

impl Walk<'_> {
    /// Current word is buf[pos..]; `m_tail` is m_t of the image run, `u` the
    /// number of symbols already pulled back through.
    #[allow(clippy::too_many_arguments)]
    fn dfs(&mut self, pos: usize, xs: (f64, f64), a: (f64, f64), u: usize, m_tail: f64) {
        let len = self.buf.len() - pos;
        if len >= self.look && self.hole.catches(&self.buf[pos..]) {
            return;
        }
        if pos == 0 {
            if !self.buf.starts_with(self.prefix) {
                return;
            }
            if self.count >= self.budget {
                self.hit = true;
                return;
            }
            self.count += 1;
            let base = m_tail * (-(u as f64) * self.p).exp();
            self.mass += base * (-self.t * 0.5 * (a.0 + a.1)).exp();
            self.lo += base * (-self.t * a.1).exp();
            self.hi += base * (-self.t * a.0).exp();
            return;
        }
        for b in [Branch::L, Branch::R] {
            let (x0, x1, d0, d1) = match b {
                Branch::R => (0.5 * (xs.0 + 1.0), 0.5 * (xs.1 + 1.0), LN_2, LN_2),
                Branch::L => {
                    let x0 = left_inverse(self.pr, xs.0);
                    let x1 = left_inverse(self.pr, xs.1);
                    (x0, x1, log_left_deriv(self.pr, x0), log_left_deriv(self.pr, x1))
                }
            };
            self.buf[pos - 1] = b;
            self.dfs(pos - 1, (x0, x1), (a.0 + d0, a.1 + d1), u + 1, m_tail);
        }
    }
}

/// m_t(I^n) for n = 1..=depth by summing the surviving D-cylinders of length
/// n + (longest hole word) - 1. A cylinder w = u L^j (u empty or ending in R)
/// gets weight e^{-|u| p} |Df^{|u|}|^{-t} m_t(L^j cylinder). The L^j masses
/// come from the closed tower.
pub fn cylinder_escape(closed: &Tower, hole: &MarkovHole, depth: usize, opts: &EscapeOptions) -> Result<EscapeReport> {
    if depth == 0 || depth > 25 {
        return Err(invalid!("escape depth must lie in 1..=25, got {depth}"));
    }
    let look = hole.max_word_len().max(1);
    let pr = closed.params();
    let budget = if opts.word_budget == 0 { 50_000_000 } else { opts.word_budget };
    let mut points = Vec::new();
    let mut hit = false;
    for n in 1..=depth {
        let total = n + look - 1;
        let mut w = Walk {
            hole,
            pr,
            t: closed.t,
            p: closed.p,
            look,
            buf: vec![Branch::L; total],
            prefix: &opts.start_prefix,
            mass: 0.0,
            lo: 0.0,
            hi: 0.0,
            count: 0,
            budget,
            hit: false,
        };
        // all-L word
        {
            let m = closed.l_run_mass(total);
            let ok = (0..n).all(|i| !hole.catches(&w.buf[i..]));
            if ok && w.buf.starts_with(w.prefix) && m > 0.0 {
                w.mass += m;
                w.lo += m;
                w.hi += m;
                w.count += 1;
            }
        }
        for j in 0..total {
            // suffix R L^j occupies the last j + 1 places
            let pos = total - j - 1;
            w.buf[pos] = Branch::R;
            for s in w.buf[pos + 1..].iter_mut() {
                *s = Branch::L;
            }
            // checks inside the suffix for places with at least `look` symbols to their right
            let mut dead = false;
            for i in pos + 1..total {
                if total - i >= look && hole.catches(&w.buf[i..]) {
                    dead = true;
                }
            }
            if dead {
                continue;
            }
            let hi_run = if j == 0 { 1.0 } else { closed.ell(j - 1) };
            let xs = (0.5, 0.5 * (hi_run + 1.0));
            let m_tail = closed.l_run_mass(j);
            w.dfs(pos, xs, (LN_2, LN_2), 1, m_tail);
        }
        hit |= w.hit;
        points.push(EscapePoint { n, mass: w.mass, lo: w.lo, hi: w.hi, cylinders: w.count });
    }
    let slope = escape_slope(&points);
    let half: Vec<(f64, f64)> = points[depth / 2..].iter().filter(|p| p.mass > 0.0).map(|p| (p.n as f64, p.mass.ln())).collect();
    let slope_power_corrected = ls_rate_with_power(&half);
    Ok(EscapeReport { t: closed.t, p: closed.p, points, slope, slope_power_corrected, budget_hit: hit })
}

/// Slope of log mass against n over the last third of the points.
pub fn escape_slope(points: &[EscapePoint]) -> f64 {
    let k = points.len();
    let start = k - (k / 3).max(2).min(k);
    let pts: Vec<(f64, f64)> = points[start..].iter().filter(|p| p.mass > 0.0).map(|p| (p.n as f64, p.mass.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    ls_slope(&pts)
}

/// int L^n 1 dm_t for n = 0..=depth on the tower of the punctured system.
pub fn operator_escape(tower: &Tower, depth: usize) -> Result<Vec<f64>> {
    let mut psi = tower.ones();
    let mut out = vec![tower.integral(&psi)];
    for n in 1..=depth {
        psi = tower.apply(&psi);
        let m = tower.integral(&psi);
        if !m.is_finite() {
            return Err(Error::NoConvergence(format!("operator escape overflowed at step {n}")));
        }
        out.push(m);
    }
    Ok(out)
}
