//! Gurevich pressure from periodic orbits of the return map, and the root
//! finders built on it: p(t), p^H(t), t^H and the regime report.
//!
//! Words over the return branches are enumerated depth-first with symbols
//! sorted by their largest weight, so a subtree is cut as soon as its weight
//! bound drops below the threshold. Each word has one periodic point. Sums
//! are binned by total return time T, so a table built at s_floor can be
//! evaluated at any s >= s_floor by reweighting with e^{-(s - s_floor) T}.
//!
//! Besides the partition sums Z_n, the binned traces
//! sum e^{S_n psi}/(1 - 1/DF^n) feed a truncated dynamical determinant
//! d(z) = exp(-sum_n a_n z^n / n); its smallest positive zero is e^{-P}.

use crate::error::{Error, Result};
use crate::induced::{InducedSystem, PotentialSpec, TailSums};
use crate::roots::{bisect, illinois};
use crate::stats::ls_slope;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureConfig {
    /// Longest word length (order of the determinant).
    pub order: usize,
    /// Words whose weight bound falls below prune * (sum of branch infima)^order are skipped.
    pub prune: f64,
    /// Maximum number of periodic orbits solved per enumeration.
    pub word_budget: u64,
    pub s_tol: f64,
    pub t_tol: f64,
    /// Root solves raise the order up to this while the order-to-order change exceeds `target_error`.
    pub max_order: usize,
    pub target_error: f64,
}

impl Default for PressureConfig {
    fn default() -> Self {
        PressureConfig { order: 4, prune: 1e-10, word_budget: 20_000_000, s_tol: 1e-8, t_tol: 1e-6, max_order: 5, target_error: 1e-3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Determinant,
    Ratio,
    Slope,
}

#[derive(Clone, Copy, Debug)]
struct Sym {
    branch: usize,
    tau: usize,
    sup: f64,
    inf: f64,
    /// extra factor for the lumped tail, 1 otherwise
    amp: f64,
    tail: bool,
}

/// Binned periodic-orbit sums for one (t, s_floor, punctured) triple.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitSums {
    pub t: f64,
    pub s_floor: f64,
    pub punctured: bool,
    pub order: usize,
    /// z[n][T] and tr[n][T], weights taken at s_floor.
    /// (Z_n, trace) weights at s_floor keyed by total return time
    rows: Vec<BTreeMap<usize, (f64, f64)>>,
    z_sparse: Vec<Vec<(f64, f64)>>,
    tr_sparse: Vec<Vec<(f64, f64)>>,
    /// Upper bound on the skipped part of Z_n at s_floor.
    pub pruned: Vec<f64>,
    pub words: u64,
    pub budget_hit: bool,
    pub tail_bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Estimates {
    /// Determinant estimates from orders 1..=K (None when no zero was found).
    pub determinant: Vec<Option<f64>>,
    pub ratio: f64,
    pub slope: f64,
    pub zn_log: Vec<f64>,
}

impl Estimates {
    /// Best available value and its estimator.
    pub fn best(&self) -> (f64, Estimator) {
        match self.determinant.last().copied().flatten() {
            Some(v) => (v, Estimator::Determinant),
            None => (self.ratio, Estimator::Ratio),
        }
    }

    /// Change between the last two determinant orders, or ratio/slope gap.
    pub fn error(&self) -> f64 {
        let k = self.determinant.len();
        if k >= 2 {
            if let (Some(a), Some(b)) = (self.determinant[k - 1], self.determinant[k - 2]) {
                return (a - b).abs();
            }
        }
        (self.ratio - self.slope).abs()
    }
}

fn canonical_multiplicity(w: &[u32]) -> Option<usize> {
    let m = w.len();
    for r in 1..m {
        for i in 0..m {
            let a = w[(i + r) % m];
            let b = w[i];
            if a < b {
                return None;
            }
            if a > b {
                break;
            }
            if i == m - 1 {
                // rotation by r reproduces the word
                return Some(r);
            }
        }
    }
    Some(m)
}

struct Enumerator<'a> {
    sys: &'a InducedSystem,
    syms: Vec<Sym>,
    suffix_sup: Vec<f64>,
    t: f64,
    s_floor: f64,
    punctured: bool,
    order: usize,
    big_s: f64,
    thr: f64,
    budget: u64,
    out: OrbitSums,
    word: Vec<u32>,
    // scratch for the orbit solve
    pts: Vec<f64>,
    ldf: Vec<f64>,
}

impl<'a> Enumerator<'a> {
    fn xi_ldf(&self, sym: &Sym, y: f64) -> (f64, f64) {
        if sym.tail {
            (self.sys.tail_xi(), f64::INFINITY)
        } else {
            self.sys.table.xi_logdf(sym.branch, y)
        }
    }

    /// Periodic point of the current word; fills pts (image points) and ldf.
    fn solve_orbit(&mut self) {
        let m = self.word.len();
        self.pts.resize(m + 1, 0.0);
        self.ldf.resize(m, 0.0);
        let mut x = 0.75;
        for _ in 0..12 {
            let mut y = x;
            let mut total = 0.0;
            for k in (0..m).rev() {
                let sym = self.syms[self.word[k] as usize];
                self.pts[k + 1] = y;
                let (xi, l) = self.xi_ldf(&sym, y);
                self.ldf[k] = l;
                total += l;
                y = xi;
            }
            // y = G(x); G' = e^{-total}
            let gp = (-total).exp();
            let next = x - (y - x) / (gp - 1.0);
            let next = if next.is_finite() { next.clamp(0.5, 1.0) } else { y };
            let done = (next - x).abs() <= 1e-15;
            x = next;
            if done {
                break;
            }
        }
        // final pass at the converged point
        let mut y = x;
        for k in (0..m).rev() {
            let sym = self.syms[self.word[k] as usize];
            self.pts[k + 1] = y;
            let (xi, l) = self.xi_ldf(&sym, y);
            self.ldf[k] = l;
            y = xi;
        }
        self.pts[0] = y;
    }

    fn accumulate(&mut self, mult: usize) {
        self.solve_orbit();
        let m = self.word.len();
        let mut logw = 0.0;
        let mut ltot = 0.0;
        let mut tau = 0usize;
        let mut amp = 1.0;
        for k in 0..m {
            let sym = self.syms[self.word[k] as usize];
            if self.punctured && !self.sys.survives(sym.branch, self.pts[k + 1]) {
                return;
            }
            tau += sym.tau;
            amp *= sym.amp;
            if sym.tail {
                let l = self.sys.table.log_df(self.sys.n_max(), self.pts[k + 1]);
                logw += -self.t * l;
                ltot = f64::INFINITY;
            } else {
                logw += -self.t * self.ldf[k];
                ltot += self.ldf[k];
            }
        }
        let w = mult as f64 * amp * (logw - self.s_floor * tau as f64).exp();
        let tr = if ltot.is_finite() { w / (-(-ltot).exp_m1()) } else { w };
        let e = self.out.rows[m].entry(tau).or_insert((0.0, 0.0));
        e.0 += w;
        e.1 += tr;
    }

    fn dfs(&mut self, prefix_sup: f64) {
        let m = self.word.len();
        if m >= 1 {
            if self.out.words >= self.budget {
                self.out.budget_hit = true;
                return;
            }
            if let Some(mult) = canonical_multiplicity(&self.word) {
                self.out.words += 1;
                self.accumulate(mult);
            }
        }
        if m == self.order {
            return;
        }
        let rest = (self.order - m - 1) as i32;
        let factor = self.big_s.powi(rest);
        for i in 0..self.syms.len() {
            let b = prefix_sup * self.syms[i].sup;
            if b * factor < self.thr {
                // everything after i is lighter
                let cut = prefix_sup * self.suffix_sup[i];
                for n in (m + 1)..=self.order {
                    self.out.pruned[n] += cut * self.big_s.powi((n - m - 1) as i32);
                }
                break;
            }
            self.word.push(i as u32);
            self.dfs(b);
            self.word.pop();
            if self.out.budget_hit {
                return;
            }
        }
    }
}

impl OrbitSums {
    /// Enumerates periodic orbits up to length `cfg.order` with weights at s_floor.
    pub fn enumerate(sys: &InducedSystem, t: f64, s_floor: f64, punctured: bool, cfg: &PressureConfig) -> Result<Self> {
        PotentialSpec::closed(t, s_floor).validate()?;
        let nm = sys.n_max();
        let spec = PotentialSpec::closed(t, s_floor);
        let mut syms = Vec::with_capacity(nm + 2);
        for b in 0..=nm {
            if punctured && sys.dead[b].overlap(0.5, 1.0) >= 0.5 * (1.0 - 1e-12) {
                continue;
            }
            let sup = sys.log_weight(&spec, b, 0.5).exp();
            let inf = sys.log_weight(&spec, b, 1.0).exp();
            syms.push(Sym { branch: b, tau: b + 1, sup, inf, amp: 1.0, tail: false });
        }
        let tail_sums: Option<TailSums> = sys.tail.sums(t, s_floor);
        let tail_bound = sys.tail_mass_bound(&spec);
        if let Some(ts) = tail_sums {
            let alive = !(punctured && sys.dead[nm + 1].overlap(0.5, 1.0) >= 0.5 * (1.0 - 1e-12));
            if alive && ts.s0 > 0.0 {
                // one lumped symbol with integer return time matched at s_floor
                let mean_j = if ts.s1.is_finite() { ts.s1 / ts.s0 } else { 1.0 };
                let tau = nm + 1 + mean_j.round().max(1.0) as usize;
                let amp = ts.s0 * (-(s_floor) * (nm + 1) as f64 + s_floor * tau as f64).exp();
                let base_sup = (-t * sys.table.log_df(nm, 0.5)).exp();
                let base_inf = (-t * sys.table.log_df(nm, 1.0)).exp();
                let e = (-s_floor * tau as f64).exp();
                syms.push(Sym { branch: nm + 1, tau, sup: base_sup * amp * e, inf: base_inf * amp * e, amp, tail: true });
            }
        } else {
            return Err(Error::Invalid(format!(
                "return-branch weights are not summable at t = {t}, s = {s_floor}"
            )));
        }
        syms.sort_by(|a, b| b.sup.total_cmp(&a.sup));
        let mut suffix_sup = vec![0.0; syms.len() + 1];
        for i in (0..syms.len()).rev() {
            suffix_sup[i] = suffix_sup[i + 1] + syms[i].sup;
        }
        let big_s = suffix_sup[0];
        let big_i: f64 = syms.iter().map(|s| s.inf).sum();
        let order = cfg.order.max(1);
        let thr = cfg.prune * big_i.powi(order as i32);
        let out = OrbitSums {
            t,
            s_floor,
            punctured,
            order,
            rows: vec![BTreeMap::new(); order + 1],
            z_sparse: Vec::new(),
            tr_sparse: Vec::new(),
            pruned: vec![0.0; order + 1],
            words: 0,
            budget_hit: false,
            tail_bound,
        };
        let mut en = Enumerator {
            sys,
            syms,
            suffix_sup,
            t,
            s_floor,
            punctured,
            order,
            big_s,
            thr,
            budget: cfg.word_budget,
            out,
            word: Vec::with_capacity(order),
            pts: Vec::new(),
            ldf: Vec::new(),
        };
        en.dfs(1.0);
        let mut out = en.out;
        // the lumped tail symbol can carry return times in the millions, so rows stay sparse
        out.z_sparse = out.rows.iter().map(|r| r.iter().map(|(&k, v)| (k as f64, v.0)).collect()).collect();
        out.tr_sparse = out.rows.iter().map(|r| r.iter().map(|(&k, v)| (k as f64, v.1)).collect()).collect();
        Ok(out)
    }

    fn eval_row(row: &[(f64, f64)], ds: f64) -> f64 {
        row.iter().map(|&(tau, v)| v * (-ds * tau).exp()).sum()
    }

    /// Z_n at s, for n = 1..=order.
    pub fn z_at(&self, s: f64) -> Vec<f64> {
        (1..=self.order).map(|n| Self::eval_row(&self.z_sparse[n], s - self.s_floor)).collect()
    }

    pub fn traces_at(&self, s: f64) -> Vec<f64> {
        (1..=self.order).map(|n| Self::eval_row(&self.tr_sparse[n], s - self.s_floor)).collect()
    }

    pub fn estimates(&self, s: f64) -> Estimates {
        let z = self.z_at(s);
        let a = self.traces_at(s);
        let zn_log: Vec<f64> = z.iter().enumerate().map(|(i, v)| v.ln() / (i + 1) as f64).collect();
        let k = self.order;
        let ratio = if k >= 2 { (z[k - 1] / z[k - 2]).ln() } else { z[0].ln() };
        let slope = if k >= 2 {
            let pts: Vec<(f64, f64)> = z.iter().enumerate().map(|(i, v)| ((i + 1) as f64, v.ln())).collect();
            ls_slope(&pts)
        } else {
            z[0].ln()
        };
        let determinant = (1..=k).map(|ord| determinant_pressure(&a[..ord], ratio)).collect();
        Estimates { determinant, ratio, slope, zn_log }
    }

    /// Pressure at s by the best estimator.
    pub fn pressure_at(&self, s: f64) -> f64 {
        self.estimates(s).best().0
    }

    /// Relative size of the skipped mass for the longest words.
    pub fn pruned_fraction(&self, s: f64) -> f64 {
        let z = self.z_at(s);
        let k = self.order;
        // bounds were taken at s_floor and only shrink for larger s
        self.pruned[k] / z[k - 1].max(1e-300)
    }
}

/// -log of the smallest positive zero of the order-K truncated determinant.
fn determinant_pressure(traces: &[f64], ratio_guess: f64) -> Option<f64> {
    let k = traces.len();
    let mut c = vec![0.0; k + 1];
    c[0] = 1.0;
    for m in 1..=k {
        let mut s = 0.0;
        for j in 1..=m {
            s += traces[j - 1] * c[m - j];
        }
        c[m] = -s / m as f64;
    }
    let d = |z: f64| c.iter().rev().fold(0.0, |acc, &cm| acc * z + cm);
    let z_guess = (-ratio_guess).exp();
    let z_hi = if z_guess.is_finite() && z_guess > 0.0 { 8.0 * z_guess } else { 8.0 / traces[0].max(1e-300) };
    let steps = 800;
    let mut prev_z = 0.0;
    let mut prev_v = 1.0;
    for i in 1..=steps {
        let z = z_hi * i as f64 / steps as f64;
        let v = d(z);
        if v <= 0.0 {
            let root = bisect(d, prev_z, z, 1e-16 * z).ok()?;
            return Some(-root.ln());
        }
        prev_z = z;
        prev_v = v;
    }
    let _ = prev_v;
    None
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PressureResult {
    pub value: f64,
    pub n_used: usize,
    pub zn_log: Vec<f64>,
    pub estimator: Estimator,
    pub tail_bound: f64,
    pub determinant_estimates: Vec<Option<f64>>,
    pub ratio_estimate: f64,
    pub slope_estimate: f64,
    pub agreement_gap: f64,
    pub error: f64,
    pub pruned_fraction: f64,
    pub words: u64,
    pub under_approximation: bool,
    pub divergence: bool,
}

/// log Z_n for the spec, from one enumeration at s = spec.s.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZnResult {
    pub log_zn: f64,
    pub words: u64,
    pub under_approximation: bool,
    pub pruned_bound: f64,
}

pub fn gurevich_zn(sys: &InducedSystem, spec: &PotentialSpec, n: usize, cfg: &PressureConfig) -> Result<ZnResult> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Invalid("word length must be positive".into()));
    }
    let c = PressureConfig { order: n, ..*cfg };
    let sums = OrbitSums::enumerate(sys, spec.t, spec.s, spec.punctured, &c)?;
    let z = sums.z_at(spec.s)[n - 1];
    Ok(ZnResult {
        log_zn: z.ln() + n as f64 * spec.shift,
        words: sums.words,
        under_approximation: sums.budget_hit,
        pruned_bound: sums.pruned[n],
    })
}

pub fn pressure(sys: &InducedSystem, spec: &PotentialSpec, cfg: &PressureConfig) -> Result<PressureResult> {
    spec.validate()?;
    let mut c = *cfg;
    loop {
        let sums = OrbitSums::enumerate(sys, spec.t, spec.s, spec.punctured, &c)?;
        let r = result_from(&sums, spec.s, spec.shift);
        if r.error <= c.target_error || c.order >= c.max_order || sums.budget_hit {
            return Ok(r);
        }
        c.order += 1;
    }
}

fn result_from(sums: &OrbitSums, s: f64, shift: f64) -> PressureResult {
    let est = sums.estimates(s);
    let (value, estimator) = est.best();
    let growing = est.zn_log.windows(2).all(|w| w[1] > w[0] + 0.5);
    PressureResult {
        value: value + shift,
        n_used: sums.order,
        zn_log: est.zn_log.iter().map(|v| v + shift).collect(),
        estimator,
        tail_bound: sums.tail_bound,
        determinant_estimates: est.determinant.iter().map(|d| d.map(|v| v + shift)).collect(),
        ratio_estimate: est.ratio + shift,
        slope_estimate: est.slope + shift,
        agreement_gap: (est.ratio - est.slope).abs(),
        error: est.error(),
        pruned_fraction: sums.pruned_fraction(s),
        words: sums.words,
        under_approximation: sums.budget_hit,
        divergence: growing,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RootReport {
    /// Root s* of s -> P(t Phi - s tau), clamped at 0.
    pub value: f64,
    pub error: f64,
    /// True when no root with s >= 0 exists (P(t Phi) <= 0 at s = 0).
    pub transient: bool,
    /// Pressure at s = 0 when it was evaluated.
    pub pressure_at_zero: Option<f64>,
    pub monotone_checked: bool,
    pub s_floor: f64,
    pub words: u64,
    pub under_approximation: bool,
    pub pruned_fraction: f64,
    /// Determinant order the root came from.
    pub order: usize,
}

/// Root in s of the pressure of t Phi - s tau (punctured or not).
pub fn pressure_root(sys: &InducedSystem, t: f64, punctured: bool, cfg: &PressureConfig) -> Result<RootReport> {
    PotentialSpec::closed(t, 0.0).validate()?;
    if !punctured && t >= 1.0 {
        return Ok(RootReport {
            value: 0.0,
            error: 0.0,
            transient: false,
            pressure_at_zero: None,
            monotone_checked: false,
            s_floor: 0.0,
            words: 0,
            under_approximation: false,
            pruned_fraction: 0.0,
            order: 0,
        });
    }
    // successive orders give a floor just below the final root
    let mut guess = order_one_root(sys, t, punctured)?;
    let mut margin = 0.1;
    for ord in 2..cfg.order.max(2) {
        let floor = (guess - margin).max(0.0);
        if !summable(sys, t, floor) {
            break;
        }
        // a floor near s = 0 prunes badly, and these stages only refine the guess
        let c = PressureConfig { order: ord, word_budget: cfg.word_budget.min(2_000_000), ..*cfg };
        let sums = OrbitSums::enumerate(sys, t, floor, punctured, &c)?;
        if sums.budget_hit || sums.pressure_at(floor) <= 0.0 {
            break;
        }
        if let Ok(r) = illinois(|s| sums.pressure_at(s), floor, guess + 1.0, 1e-6) {
            margin = (3.0 * (r - guess).abs()).clamp(0.01, 0.1);
            guess = r;
        } else {
            break;
        }
    }
    let mut s_floor = (guess - margin).max(0.0);
    let mut iterations = 0;
    let mut cfg = *cfg;
    loop {
        iterations += 1;
        if !summable(sys, t, s_floor) {
            s_floor = (s_floor + 0.02).max(1e-3);
        }
        let sums = OrbitSums::enumerate(sys, t, s_floor, punctured, &cfg)?;
        let p_floor = sums.pressure_at(s_floor);
        if p_floor <= 0.0 {
            if s_floor <= 1e-12 || !summable(sys, t, 0.0) && s_floor <= 1e-3 {
                return Ok(RootReport {
                    value: 0.0,
                    error: sums.estimates(s_floor).error(),
                    transient: true,
                    pressure_at_zero: Some(p_floor),
                    monotone_checked: false,
                    s_floor,
                    words: sums.words,
                    under_approximation: sums.budget_hit,
                    pruned_fraction: sums.pruned_fraction(s_floor),
                    order: cfg.order,
                });
            }
            if iterations > 6 {
                return Err(Error::Root(format!("could not bracket the pressure root at t = {t}")));
            }
            s_floor = (s_floor - 2.0 * margin).max(0.0);
            continue;
        }
        let mut hi = s_floor + 0.25;
        let mut tries = 0;
        while sums.pressure_at(hi) > 0.0 {
            hi += 0.5 * (hi - s_floor) + 0.25;
            tries += 1;
            if tries > 40 {
                return Err(Error::Root("no upper bracket for the pressure root".into()));
            }
        }
        let monotone = (0..5)
            .map(|i| sums.pressure_at(s_floor + (hi - s_floor) * i as f64 / 4.0))
            .collect::<Vec<_>>()
            .windows(2)
            .all(|w| w[1] < w[0]);
        if !monotone {
            return Err(Error::Gate(format!("pressure not strictly decreasing in s at t = {t}")));
        }
        let root = illinois(|s| sums.pressure_at(s), s_floor, hi, cfg.s_tol)?;
        // the lower-order estimate moves the root by roughly error / |dP/ds|
        let est = sums.estimates(root);
        let k = est.determinant.len();
        let mut err = est.error();
        if k >= 2 {
            if let Some(lower) = lower_order_root(&sums, s_floor, hi, k - 1) {
                err = (lower - root).abs();
            }
        }
        if root < s_floor + 0.002 && s_floor > 0.0 && iterations < 6 {
            s_floor = (root - 0.02).max(0.0);
            continue;
        }
        if err > cfg.target_error && cfg.order < cfg.max_order && !sums.budget_hit {
            cfg.order += 1;
            s_floor = (root - (3.0 * err).clamp(0.01, 0.1)).max(0.0);
            continue;
        }
        return Ok(RootReport {
            value: root,
            error: err,
            transient: false,
            pressure_at_zero: if s_floor == 0.0 { Some(p_floor) } else { None },
            monotone_checked: true,
            s_floor,
            words: sums.words,
            under_approximation: sums.budget_hit,
            pruned_fraction: sums.pruned_fraction(root),
            order: cfg.order,
        });
    }
}

fn lower_order_root(sums: &OrbitSums, lo: f64, hi: f64, ord: usize) -> Option<f64> {
    let f = |s: f64| {
        let a = sums.traces_at(s);
        determinant_pressure(&a[..ord], sums.estimates(s).ratio).unwrap_or(f64::NAN)
    };
    illinois(f, lo, hi, 1e-8).ok()
}

fn summable(sys: &InducedSystem, t: f64, s: f64) -> bool {
    sys.tail.sums(t, s).is_some()
}

/// Root of Z_1(s) = 1, summing fixed-point weights of every branch.
fn order_one_root(sys: &InducedSystem, t: f64, punctured: bool) -> Result<f64> {
    let nm = sys.n_max();
    // fixed point of branch b: y = xi_b(y); these barely move with b, iterate from 0.75
    let mut terms: Vec<(f64, usize)> = Vec::with_capacity(nm + 1);
    for b in 0..=nm {
        let mut y = 0.75;
        for _ in 0..60 {
            let ny = sys.table.xi(b, y);
            if (ny - y).abs() < 1e-15 {
                y = ny;
                break;
            }
            y = ny;
        }
        if punctured && !sys.survives(b, y) {
            continue;
        }
        terms.push((-t * sys.table.log_df(b, y), b + 1));
    }
    let z1 = |s: f64| -> f64 {
        let mut acc: f64 = terms.iter().map(|&(l, tau)| (l - s * tau as f64).exp()).sum();
        if let Some(ts) = sys.tail.sums(t, s.max(1e-9)) {
            acc += (-t * sys.table.log_df(nm, 0.5) - s * (nm + 1) as f64).exp() * ts.s0;
        }
        acc.ln()
    };
    let f0 = z1(1e-9);
    if f0 <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while z1(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Root("order-one root not bracketed".into()));
        }
    }
    bisect(z1, 1e-9, hi, 1e-10)
}

pub fn closed_pressure(sys: &InducedSystem, t: f64, cfg: &PressureConfig) -> Result<RootReport> {
    pressure_root(sys, t, false, cfg)
}

pub fn punctured_pressure(sys: &InducedSystem, t: f64, cfg: &PressureConfig) -> Result<RootReport> {
    if sys.hole.is_none() {
        return closed_pressure(sys, t, cfg);
    }
    pressure_root(sys, t, true, cfg)
}

/// P(t Phi^H) at s = 0, with the estimator error.
pub fn punctured_pressure_at_zero(sys: &InducedSystem, t: f64, cfg: &PressureConfig) -> Result<(f64, f64)> {
    let punctured = sys.hole.is_some();
    if !summable(sys, t, 0.0) {
        return Ok((f64::INFINITY, 0.0));
    }
    let sums = OrbitSums::enumerate(sys, t, 0.0, punctured, cfg)?;
    let est = sums.estimates(0.0);
    Ok((est.best().0, est.error()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub t_h: f64,
    /// P(t^H Phi^H) from periodic orbits.
    pub pressure_at_t_h: f64,
    pub pressure_error: f64,
    /// Same zero from the eigenvalue alone (equal to t_h; kept for output stability).
    pub t_h_spectral: f64,
    pub lower_bound: f64,
    pub in_range: bool,
}

/// t^H: the zero of t -> P(t Phi^H) at s = 0. Returns 1 without a hole.
///
/// The zero is located on the leading eigenvalue of the discretized punctured
/// operator at s = 0, which is cheap and smooth in t. The periodic-orbit
/// pressure is then evaluated there as an independent check.
pub fn dimension_threshold(sys: &InducedSystem, cfg: &PressureConfig) -> Result<ThresholdReport> {
    let g = sys.params().gamma;
    let lower = g / (1.0 + g);
    if sys.hole.is_none() {
        return Ok(ThresholdReport {
            t_h: 1.0,
            pressure_at_t_h: 0.0,
            pressure_error: 0.0,
            t_h_spectral: 1.0,
            lower_bound: lower,
            in_range: false,
        });
    }
    let f = memo(|t: f64| {
        let op = crate::spectra::assemble(sys, &PotentialSpec::punctured(t, 0.0), crate::spectra::DEFAULT_M)?;
        Ok(crate::spectra::leading_value(&op)?.ln())
    });
    let (t0, slope) = coarse_threshold(&f, lower)?;
    let th = if t0 >= 1.0 { 1.0 } else { secant_threshold(&f, t0, slope, lower, 1e-10)?.0 };
    let r = pressure(sys, &PotentialSpec::punctured(th, 0.0), cfg)?;
    Ok(ThresholdReport {
        t_h: th,
        pressure_at_t_h: r.value,
        pressure_error: r.error,
        t_h_spectral: th,
        lower_bound: lower,
        in_range: th > lower && th < 1.0,
    })
}

fn memo<'a>(f: impl Fn(f64) -> Result<f64> + 'a) -> impl Fn(f64) -> Result<f64> + 'a {
    let seen = std::cell::RefCell::new(Vec::<(f64, f64)>::new());
    move |t| {
        if let Some(&(_, v)) = seen.borrow().iter().find(|(a, _)| *a == t) {
            return Ok(v);
        }
        let v = f(t)?;
        seen.borrow_mut().push((t, v));
        Ok(v)
    }
}

/// Scans down from t = 1 in steps of 0.05, then refines. Returns (1, 0) when
/// P(Phi^H) >= 0; otherwise the root and the local slope.
fn coarse_threshold(f: &dyn Fn(f64) -> Result<f64>, lower: f64) -> Result<(f64, f64)> {
    let mut hi = 1.0;
    let mut fhi = f(1.0)?;
    if fhi >= 0.0 {
        return Ok((1.0, 0.0));
    }
    let mut lo = 0.95;
    let mut flo = f(lo)?;
    while flo <= 0.0 {
        hi = lo;
        fhi = flo;
        lo -= 0.05;
        if lo <= lower + 1e-3 {
            lo = lower + 1e-3;
            flo = f(lo)?;
            if flo <= 0.0 {
                return Err(Error::Root("no sign change of the punctured pressure above the summability bound".into()));
            }
            break;
        }
        flo = f(lo)?;
    }
    let slope = (fhi - flo) / (hi - lo);
    secant_threshold(f, lo - flo / slope, slope, lower, 1e-4)
}

/// Secant iteration from t0 with an initial slope, switching to regula falsi
/// once a sign change is seen. Stops when |P| < ftol. Returns (root, slope).
fn secant_threshold(f: &dyn Fn(f64) -> Result<f64>, t0: f64, slope: f64, lower: f64, ftol: f64) -> Result<(f64, f64)> {
    let lo_bound = lower + 1e-3;
    let clamp = |t: f64| t.clamp(lo_bound, 1.0);
    let mut a = clamp(t0);
    let mut fa = f(a)?;
    if fa.abs() < ftol {
        return Ok((a, slope));
    }
    let mut sl = if slope < 0.0 { slope } else { -1.0 };
    let mut bracket: Option<(f64, f64, f64, f64)> = None; // (pos t, f, neg t, f)
    for _ in 0..40 {
        let mut b = clamp(a - fa / sl);
        if let Some((tp, fp, tn, fnn)) = bracket {
            let (l, h) = (tp.min(tn), tp.max(tn));
            if !(b > l && b < h) {
                b = tp - fp * (tn - tp) / (fnn - fp);
                if !(b > l && b < h) {
                    b = 0.5 * (l + h);
                }
            }
        }
        if b == a {
            return if b >= 1.0 && fa > 0.0 { Ok((1.0, sl)) } else { Ok((a, sl)) };
        }
        let fb = f(b)?;
        if fb.abs() < ftol {
            return Ok((b, sl));
        }
        for (t, v) in [(a, fa), (b, fb)] {
            bracket = Some(match bracket {
                None if fa.signum() != fb.signum() => {
                    if fa > 0.0 {
                        (a, fa, b, fb)
                    } else {
                        (b, fb, a, fa)
                    }
                }
                None => continue,
                Some((tp, fp, tn, fnn)) => {
                    if v > 0.0 && (t - tn).abs() < (tp - tn).abs() {
                        (t, v, tn, fnn)
                    } else if v < 0.0 && (t - tp).abs() < (tn - tp).abs() {
                        (tp, fp, t, v)
                    } else {
                        (tp, fp, tn, fnn)
                    }
                }
            });
        }
        let s_new = (fb - fa) / (b - a);
        if s_new < 0.0 && s_new.is_finite() {
            sl = s_new;
        }
        a = b;
        fa = fb;
        if let Some((tp, _, tn, _)) = bracket {
            if (tp - tn).abs() < 1e-9 {
                return Ok((a, sl));
            }
        }
    }
    Err(Error::Root("threshold iteration did not settle".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    SpectralGap,
    Boundary,
    Intermediate,
    Degenerate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegimeReport {
    pub t: f64,
    pub gamma: f64,
    pub hole: String,
    pub p_t: f64,
    pub p_t_error: f64,
    #[serde(rename = "pH_t")]
    pub ph_t: f64,
    #[serde(rename = "pH_t_error")]
    pub ph_t_error: f64,
    #[serde(rename = "pH_transient")]
    pub ph_transient: bool,
    #[serde(rename = "tH")]
    pub t_h: f64,
    pub log_lambda_pred: f64,
    pub regime: Regime,
}

pub fn regime_with_threshold(sys: &InducedSystem, t: f64, t_h: f64, cfg: &PressureConfig) -> Result<RegimeReport> {
    let p = closed_pressure(sys, t, cfg)?;
    let ph = if sys.hole.is_some() { punctured_pressure(sys, t, cfg)? } else { p.clone() };
    let band = 2.0 * cfg.t_tol;
    let regime = if t >= 1.0 - 1e-12 {
        Regime::Degenerate
    } else if (t - t_h).abs() <= band {
        Regime::Boundary
    } else if t < t_h {
        Regime::SpectralGap
    } else {
        Regime::Intermediate
    };
    let ph_value = if regime == Regime::Intermediate { 0.0 } else { ph.value };
    Ok(RegimeReport {
        t,
        gamma: sys.params().gamma,
        hole: sys.hole.as_ref().map(|h| h.label()).unwrap_or_else(|| "none".into()),
        p_t: p.value,
        p_t_error: p.error,
        ph_t: ph_value,
        ph_t_error: ph.error,
        ph_transient: ph.transient || regime == Regime::Intermediate,
        t_h,
        log_lambda_pred: ph_value - p.value,
        regime,
    })
}

pub fn regime(sys: &InducedSystem, t: f64, cfg: &PressureConfig) -> Result<RegimeReport> {
    let th = dimension_threshold(sys, cfg)?;
    regime_with_threshold(sys, t, th.t_h, cfg)
}

/// Finite-difference probe of the left derivative of p^H at t^H. Diagnostic only.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DerivativeProbe {
    pub t_h: f64,
    pub steps: Vec<f64>,
    pub left_slopes: Vec<f64>,
    pub critical_ratio: f64,
}

pub fn derivative_probe(sys: &InducedSystem, t_h: f64, cfg: &PressureConfig) -> Result<DerivativeProbe> {
    let g = sys.params().gamma;
    let steps = vec![0.04, 0.02, 0.01];
    let mut slopes = Vec::new();
    for &h in &steps {
        let v = punctured_pressure(sys, (t_h - h).max(0.0), cfg)?.value;
        slopes.push(-v / h);
    }
    Ok(DerivativeProbe { t_h, steps, left_slopes: slopes, critical_ratio: 2.0 * g / (1.0 + g) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicity_of_rotations() {
        assert_eq!(canonical_multiplicity(&[0, 1]), Some(2));
        assert_eq!(canonical_multiplicity(&[1, 0]), None);
        assert_eq!(canonical_multiplicity(&[0, 1, 0, 1]), Some(2));
        assert_eq!(canonical_multiplicity(&[2, 2, 2]), Some(1));
        assert_eq!(canonical_multiplicity(&[0, 0, 1]), Some(3));
        assert_eq!(canonical_multiplicity(&[0, 1, 0]), None);
    }

    #[test]
    fn determinant_of_single_eigenvalue() {
        // traces of one eigenvalue 0.5: a_n = 0.5^n
        let a: Vec<f64> = (1..=4).map(|n| 0.5f64.powi(n)).collect();
        let p = determinant_pressure(&a, 0.5f64.ln()).unwrap();
        assert!((p - 0.5f64.ln()).abs() < 1e-12);
    }
}
