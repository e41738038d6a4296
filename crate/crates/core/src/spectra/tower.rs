//! Full-system operators on I through renewal levels.
//!
//! A function psi on I is stored as levels psi_k(y) = psi(z_k(y)) for y in Y,
//! k = 0..=K, all on the same Y grid. The left branch is then an exact shift
//! from level k+1 to level k; the right branch pulls level 0 back through
//! xi_k, which needs interpolation. Levels above K are folded into a
//! reservoir that copies level K.

use super::{assemble, leading_eigen, DiscretizedOperator, SpectralData, YGrid};
use crate::error::{invalid, Error, Result};
use crate::induced::{BranchTable, InducedSystem, PotentialSpec, TailModel};
use crate::map_core::{left_inverse, log_left_deriv, MapParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::sync::Arc;

pub const DEFAULT_LEVELS: usize = 400;

#[derive(Clone, Debug)]
pub struct Tower {
    pub grid: YGrid,
    pub levels: usize,
    pub t: f64,
    pub p: f64,
    table: Arc<BranchTable>,
    hole: Option<crate::holes::Hole>,
    d: usize,
    shift: Vec<f64>,
    inj_idx: Vec<u32>,
    inj_frac: Vec<f64>,
    inj_w: Vec<f64>,
    /// m_t mass carried by each node of each level.
    pub mw: Vec<f64>,
    /// m_t mass of the levels above K.
    pub reservoir: f64,
    /// alive[k * nseg + s]: level-k points of segment s avoid the hole.
    alive: Vec<bool>,
    /// Eigenvalue of the closed induced operator at s = p (1 when p = p(t)).
    pub closed_lambda: f64,
}

impl Tower {
    /// Tower for the punctured full-system operator of `sys` (closed when it has
    /// no hole), normalized by e^{-p}. The reference measure m_t comes from the
    /// closed induced operator at s = p.
    pub fn new(sys: &InducedSystem, t: f64, p: f64, levels: usize, m: usize) -> Result<Tower> {
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid!("t must lie in [0,1], got {t}"));
        }
        let closed = assemble(sys, &PotentialSpec::closed(t, p), m)?;
        let eig = leading_eigen(&closed)?;
        Self::from_closed(sys, &closed, &eig, levels)
    }

    pub fn from_closed(sys: &InducedSystem, closed: &DiscretizedOperator, eig: &SpectralData, levels: usize) -> Result<Tower> {
        let t = closed.spec.t;
        let p = closed.spec.s;
        let table = sys.table.clone();
        let k_max = levels.min(table.n_max - 1).max(1);
        let grid = closed.grid.clone();
        let d = grid.len();
        let nseg = grid.segs.len();
        let hole = sys.hole.clone();
        let mut alive = vec![true; (k_max + 2) * nseg];
        if let Some(h) = &hole {
            for k in 0..=k_max + 1 {
                for s in 0..nseg {
                    alive[k * nseg + s] = !h.contains(table.z(k, grid.seg_mid(s)));
                }
            }
        }
        let lam_at = |k: usize, i: usize| table.lam(k, grid.nodes[i]);
        let mut shift = vec![0.0; (k_max + 1) * d];
        let mut inj_idx = vec![0u32; (k_max + 1) * d];
        let mut inj_frac = vec![0.0; (k_max + 1) * d];
        let mut inj_w = vec![0.0; (k_max + 1) * d];
        let mut mw = vec![0.0; (k_max + 1) * d];
        let q: Vec<f64> = eig.left.clone();
        let r_inj = (-p - t * LN_2).exp();
        for k in 0..=k_max {
            for i in 0..d {
                let s = grid.seg[i];
                let mid = grid.seg_mid(s);
                let l_k = lam_at(k, i);
                let l_k1 = lam_at(k + 1, i);
                let a = alive[(k + 1) * nseg + s];
                shift[k * d + i] = if a { (-p - t * (l_k1 - l_k)).exp() } else { 0.0 };
                let x = table.xi(k, grid.nodes[i]);
                let (j, f) = grid.locate(x);
                inj_idx[k * d + i] = j as u32;
                inj_frac[k * d + i] = f;
                let a0 = hole.as_ref().map_or(true, |h| !h.contains(table.xi(k, mid)));
                inj_w[k * d + i] = if a0 { r_inj } else { 0.0 };
                mw[k * d + i] = q[i] * (-(k as f64) * p - t * l_k).exp();
            }
        }
        let g = table.params.gamma;
        let tm = TailModel { n: k_max, kappa: g * table.params.c() * table.renewal.ell[k_max].powf(g), gamma: g };
        let ts = tm
            .sums(t, p)
            .ok_or_else(|| invalid!("level masses are not summable at t = {t}, p = {p}"))?;
        let top: f64 = mw[k_max * d..].iter().sum();
        let reservoir_raw = top * ts.s0;
        let total: f64 = mw.iter().sum::<f64>() + reservoir_raw;
        mw.iter_mut().for_each(|x| *x /= total);
        let reservoir = reservoir_raw / total;
        Ok(Tower {
            grid,
            levels: k_max,
            t,
            p,
            table,
            hole,
            d,
            shift,
            inj_idx,
            inj_frac,
            inj_w,
            mw,
            reservoir,
            alive,
            closed_lambda: eig.lambda,
        })
    }

    pub fn dim(&self) -> usize {
        (self.levels + 1) * self.d
    }

    /// Renewal endpoint ell_k = z_k(1/2), with ell_0 = 1/2.
    pub fn ell(&self, k: usize) -> f64 {
        let e = &self.table.renewal.ell;
        e[k.min(e.len() - 1)]
    }

    pub fn ones(&self) -> Vec<f64> {
        vec![1.0; self.dim()]
    }

    pub fn params(&self) -> MapParams {
        self.table.params
    }

    /// Applies the punctured operator psi -> L(1_{I\H} psi), normalized by e^{-p}.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        let d = self.d;
        let k_max = self.levels;
        let mut out = vec![0.0; psi.len()];
        let base = &psi[..d];
        for k in 0..=k_max {
            let up = if k < k_max { &psi[(k + 1) * d..(k + 2) * d] } else { &psi[k_max * d..] };
            let o = &mut out[k * d..(k + 1) * d];
            for i in 0..d {
                let idx = k * d + i;
                let j = self.inj_idx[idx] as usize;
                let f = self.inj_frac[idx];
                let v0 = (1.0 - f) * base[j] + f * base[j + 1];
                o[i] = self.shift[idx] * up[i] + self.inj_w[idx] * v0;
            }
        }
        out
    }

    fn top_average(&self, psi: &[f64]) -> f64 {
        let d = self.d;
        let k = self.levels;
        let m: f64 = self.mw[k * d..].iter().sum();
        if m > 0.0 {
            self.mw[k * d..].iter().zip(&psi[k * d..]).map(|(a, b)| a * b).sum::<f64>() / m
        } else {
            0.0
        }
    }

    /// int psi dm_t, with the reservoir valued at the level-K average.
    pub fn integral(&self, psi: &[f64]) -> f64 {
        self.mw.iter().zip(psi).map(|(a, b)| a * b).sum::<f64>() + self.reservoir * self.top_average(psi)
    }

    pub fn l1(&self, psi: &[f64]) -> f64 {
        self.mw.iter().zip(psi).map(|(a, b)| a * b.abs()).sum::<f64>() + self.reservoir * self.top_average(psi).abs()
    }

    /// m_t mass of level k (the cell J_k, or Y for k = 0).
    pub fn level_mass(&self, k: usize) -> f64 {
        if k > self.levels {
            return 0.0;
        }
        self.mw[k * self.d..(k + 1) * self.d].iter().sum()
    }

    /// m_t of the L^j cylinder [0, ell_{j-1}), j >= 1; 1 for j = 0.
    pub fn l_run_mass(&self, j: usize) -> f64 {
        if j == 0 {
            return 1.0;
        }
        let full: f64 = (j..=self.levels).map(|k| self.level_mass(k)).sum();
        if j <= self.levels {
            full + self.reservoir
        } else {
            // inside the reservoir: scale by the renewal lengths
            let ell = &self.table.renewal.ell;
            self.reservoir * (ell[(j - 1).min(ell.len() - 1)] / ell[self.levels]).min(1.0)
        }
    }

    /// int_{[0, delta)} psi dm_t.
    pub fn integral_below(&self, psi: &[f64], delta: f64) -> f64 {
        if delta >= 0.5 {
            let lower: f64 = (1..=self.levels)
                .map(|k| self.mw[k * self.d..(k + 1) * self.d].iter().zip(&psi[k * self.d..]).map(|(a, b)| a * b).sum::<f64>())
                .sum::<f64>()
                + self.reservoir * self.top_average(psi);
            let y0: f64 = self.mw[..self.d]
                .iter()
                .zip(&psi[..self.d])
                .zip(&self.grid.nodes)
                .filter(|(_, y)| **y < delta)
                .map(|((a, b), _)| a * b)
                .sum();
            return lower + y0;
        }
        let k0 = match self.table.renewal.locate(delta) {
            Some(k) => k,
            None => return 0.0,
        };
        let mut acc = self.reservoir * self.top_average(psi);
        if k0 > self.levels {
            return acc * (delta / self.table.renewal.ell[self.levels]).min(1.0);
        }
        for k in k0 + 1..=self.levels {
            let r = k * self.d..(k + 1) * self.d;
            acc += self.mw[r.clone()].iter().zip(&psi[r]).map(|(a, b)| a * b).sum::<f64>();
        }
        let y_cut = self.table.z_inverse(k0, delta);
        for i in 0..self.d {
            if self.grid.nodes[i] < y_cut {
                acc += self.mw[k0 * self.d + i] * psi[k0 * self.d + i];
            }
        }
        acc
    }

    /// Value of a level function at a point of I.
    pub fn eval(&self, psi: &[f64], x: f64) -> f64 {
        let d = self.d;
        if x >= 0.5 {
            return self.grid.interp(&psi[..d], x.min(1.0));
        }
        match self.table.renewal.locate(x) {
            Some(k) if k <= self.levels => {
                let y = self.table.z_inverse(k, x);
                self.grid.interp(&psi[k * d..(k + 1) * d], y)
            }
            _ => self.top_average(psi),
        }
    }

    /// L(1_{I\H} psi)(x) evaluated from the map itself, not from the level tables.
    pub fn apply_at(&self, psi: &[f64], x: f64) -> f64 {
        let pr = self.params();
        let mut acc = 0.0;
        let xl = left_inverse(pr, x);
        if !self.in_hole(xl) {
            acc += (-self.t * log_left_deriv(pr, xl)).exp() * self.eval(psi, xl);
        }
        let xr = 0.5 * (x + 1.0);
        if !self.in_hole(xr) {
            acc += (-self.t * LN_2).exp() * self.eval(psi, xr);
        }
        (-self.p).exp() * acc
    }

    fn in_hole(&self, x: f64) -> bool {
        self.hole.as_ref().map_or(false, |h| h.contains(x))
    }

    pub fn node_alive(&self, k: usize, i: usize) -> bool {
        self.alive[k * self.grid.segs.len() + self.grid.seg[i]]
    }

    /// Relative l1 residual |L psi - lambda psi| / |psi| measured at cell
    /// midpoints of levels 0..=kmax with `apply_at`.
    pub fn offgrid_residual(&self, psi: &[f64], lambda: f64, kmax: usize) -> f64 {
        let d = self.d;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..=kmax.min(self.levels - 1) {
            for (i, j) in self.grid.cells() {
                let y = 0.5 * (self.grid.nodes[i] + self.grid.nodes[j]);
                let x = self.table.z(k, y);
                let w = 0.5 * (self.mw[k * d + i] + self.mw[k * d + j]);
                let g = self.eval(psi, x);
                num += w * (self.apply_at(psi, x) - lambda * g).abs();
                den += w * g.abs();
            }
        }
        num / den
    }

    /// Density cells for export: level cells mapped to I, plus the reservoir.
    pub fn cells(&self, psi: &[f64]) -> Vec<DensityCell> {
        let d = self.d;
        let mut out = Vec::new();
        let mut share = vec![0.0; d];
        for &(a, b) in &self.grid.segs {
            for i in a..=b {
                share[i] = if i == a || i == b { 1.0 } else { 0.5 };
            }
        }
        for k in (0..=self.levels).rev() {
            for (i, j) in self.grid.cells() {
                let (yl, yr) = (self.grid.nodes[i], self.grid.nodes[j]);
                if yr <= yl {
                    continue;
                }
                let (l, r) = (self.table.z(k, yl), self.table.z(k, yr));
                let w = share[i] * self.mw[k * d + i] + share[j] * self.mw[k * d + j];
                let v = 0.5 * (psi[k * d + i] + psi[k * d + j]);
                out.push(DensityCell { cell_left: l, cell_right: r, density_value: v, reference_weight: w });
            }
        }
        out.insert(
            0,
            DensityCell {
                cell_left: 0.0,
                cell_right: self.table.renewal.ell[self.levels],
                density_value: self.top_average(psi),
                reference_weight: self.reservoir,
            },
        );
        out.sort_by(|a, b| a.cell_left.total_cmp(&b.cell_left));
        let z: f64 = out.iter().map(|c| c.density_value * c.reference_weight).sum();
        if z > 0.0 {
            out.iter_mut().for_each(|c| c.density_value /= z);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCell {
    pub cell_left: f64,
    pub cell_right: f64,
    pub density_value: f64,
    pub reference_weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityOnI {
    pub t: f64,
    pub levels: usize,
    pub cells: Vec<DensityCell>,
    /// Upper bound for the density mass beyond the last level.
    pub tail_bound: f64,
}

impl DensityOnI {
    /// (density, reference mass per unit length) of the cell containing x.
    fn at(&self, x: f64) -> (f64, f64) {
        let i = self.cells.partition_point(|c| c.cell_right <= x).min(self.cells.len() - 1);
        let c = &self.cells[i];
        let len = (c.cell_right - c.cell_left).max(1e-300);
        (c.density_value, c.reference_weight / len)
    }
}

/// L1(m_t) distance of two piecewise-constant densities on the merged cells.
/// Reference masses are split in proportion to length and averaged between
/// the two exports.
pub fn density_l1(a: &DensityOnI, b: &DensityOnI) -> f64 {
    let mut br: Vec<f64> = a.cells.iter().chain(&b.cells).flat_map(|c| [c.cell_left, c.cell_right]).collect();
    br.sort_by(f64::total_cmp);
    br.dedup();
    let mut acc = 0.0;
    for w in br.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        let mid = 0.5 * (l + r);
        let (ga, ma) = a.at(mid);
        let (gb, mb) = b.at(mid);
        acc += (ga - gb).abs() * 0.5 * (ma + mb) * (r - l);
    }
    acc
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccimReport {
    pub lambda: f64,
    pub log_lambda: f64,
    /// Leading eigenvalue of the lambda-weighted punctured induced operator.
    pub gate_eigenvalue: f64,
    pub closed_eigenvalue: f64,
    pub min_density_outside_hole: f64,
    /// l1(m_t) residual of L g - lambda g at off-grid points.
    pub invariance_residual: f64,
    pub gap_estimate: f64,
    pub density: DensityOnI,
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// Conditionally invariant density for t < t^H, from the punctured induced
/// operator at s = p^H(t) and the downward level recursion.
pub fn accim_on_i(sys: &InducedSystem, t: f64, p_t: f64, ph_t: f64, levels: usize, m: usize) -> Result<AccimReport> {
    if sys.hole.is_none() && (p_t - ph_t).abs() > 1e-9 {
        return Err(invalid!("without a hole p^H(t) must equal p(t)"));
    }
    let op = assemble(sys, &PotentialSpec::punctured(t, ph_t), m)?;
    let eig = leading_eigen(&op)?;
    if (eig.lambda - 1.0).abs() > 2e-3 {
        return Err(Error::Gate(format!(
            "lambda-weighted induced operator has leading eigenvalue {:.6}, expected 1 within 2e-3",
            eig.lambda
        )));
    }
    let tower = Tower::new(sys, t, p_t, levels, m)?;
    let lambda = (ph_t - p_t).exp();
    let d = tower.d;
    let k_max = tower.levels;
    let mut g = vec![0.0; tower.dim()];
    g[..d].copy_from_slice(&eig.right);
    let inj = |k: usize, i: usize, g0: &[f64]| {
        let idx = k * d + i;
        let j = tower.inj_idx[idx] as usize;
        let f = tower.inj_frac[idx];
        tower.inj_w[idx] * ((1.0 - f) * g0[j] + f * g0[j + 1])
    };
    let g0 = eig.right.clone();
    for i in 0..d {
        let idx = k_max * d + i;
        let den = lambda - tower.shift[idx];
        g[idx] = if den > 0.0 { inj(k_max, i, &g0) / den } else { 0.0 };
    }
    for k in (1..k_max).rev() {
        for i in 0..d {
            let idx = k * d + i;
            g[idx] = (tower.shift[idx] * g[idx + d] + inj(k, i, &g0)) / lambda;
        }
    }
    let z = tower.integral(&g);
    g.iter_mut().for_each(|x| *x /= z);
    let mut min_out: f64 = f64::INFINITY;
    for k in 0..=k_max {
        for i in 0..d {
            if tower.node_alive(k, i) {
                min_out = min_out.min(g[k * d + i]);
            }
        }
    }
    let residual = tower.offgrid_residual(&g, lambda, k_max.min(200));
    let tail_bound = tower.reservoir * tower.top_average(&g);
    let density = DensityOnI { t, levels: k_max, cells: tower.cells(&g), tail_bound };
    Ok(AccimReport {
        lambda,
        log_lambda: ph_t - p_t,
        gate_eigenvalue: eig.lambda,
        closed_eigenvalue: tower.closed_lambda,
        min_density_outside_hole: min_out,
        invariance_residual: residual,
        gap_estimate: eig.gap_estimate,
        density,
        values: g,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AveragedStep {
    pub n: usize,
    pub residual: f64,
    pub log_holder: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AveragedReport {
    pub t: f64,
    pub lambda: f64,
    pub steps: Vec<AveragedStep>,
    /// t * C_d, the bound for the log-Hoelder constant.
    pub holder_bound: f64,
    pub density: DensityOnI,
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// Largest |log g(y) - log g(y')| / |y - y'| over neighbouring level-0 nodes of
/// surviving segments.
fn log_holder(tower: &Tower, g: &[f64]) -> f64 {
    let mut c: f64 = 0.0;
    for (i, j) in tower.grid.cells() {
        if !tower.node_alive(0, i) {
            continue;
        }
        let (a, b) = (g[i], g[j]);
        if a > 0.0 && b > 0.0 {
            let h = tower.grid.nodes[j] - tower.grid.nodes[i];
            if h > 1e-9 {
                c = c.max((b.ln() - a.ln()).abs() / h);
            }
        }
    }
    c
}

/// Lipschitz constant C_1 of y -> Lambda_n(y) over all branches, divided by
/// 1 - 1/2 to cover compositions (every inverse branch contracts by 1/2 or more).
pub fn distortion_constant(table: &BranchTable) -> f64 {
    let ys: Vec<f64> = (0..=256).map(|j| 0.5 + 0.5 * j as f64 / 256.0).collect();
    let mut c1: f64 = 0.0;
    let mut n = 1;
    while n <= table.n_max {
        for w in ys.windows(2) {
            let dl = table.lam(n, w[1]) - table.lam(n, w[0]);
            c1 = c1.max(dl.abs() / (w[1] - w[0]));
        }
        n += if n < 64 { 1 } else { n / 16 };
    }
    2.0 * c1
}

/// Averaging scheme for t in [t^H, 1): (1/Z_n) sum_i a_i L^i 1 with
/// a_i = i^{t(1+1/gamma)-1} lambda^{-i}, lambda = e^{-p(t)}.
pub fn averaged_accim(sys: &InducedSystem, t: f64, p_t: f64, checkpoints: &[usize], levels: usize, m: usize) -> Result<AveragedReport> {
    if checkpoints.is_empty() {
        return Err(invalid!("need at least one checkpoint"));
    }
    let tower = Tower::new(sys, t, p_t, levels, m)?;
    let gamma = tower.params().gamma;
    let lambda = (-p_t).exp();
    let expo = t * (1.0 + 1.0 / gamma) - 1.0;
    let n_last = *checkpoints.iter().max().unwrap();
    let mut psi = tower.ones();
    let mut log_norm = 0.0;
    let mut avg = vec![0.0; tower.dim()];
    let mut log_wsum = f64::NEG_INFINITY;
    let mut steps = Vec::new();
    for i in 1..=n_last {
        psi = tower.apply(&psi);
        let nrm = tower.l1(&psi);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::NoConvergence(format!("iterate vanished at step {i}")));
        }
        psi.iter_mut().for_each(|x| *x /= nrm);
        log_norm += nrm.ln();
        // weight a_i |L^i 1| of the normalized iterate, in log form
        let lw = expo * (i as f64).ln() + i as f64 * p_t + log_norm;
        let new_sum = log_add(log_wsum, lw);
        let keep = (log_wsum - new_sum).exp();
        let add = (lw - new_sum).exp();
        avg.iter_mut().zip(&psi).for_each(|(a, b)| *a = keep * *a + add * b);
        log_wsum = new_sum;
        if checkpoints.contains(&i) {
            let la = tower.apply(&avg);
            let num = tower.l1(&la.iter().zip(&avg).map(|(a, b)| a - lambda * b).collect::<Vec<_>>());
            steps.push(AveragedStep { n: i, residual: num / (lambda * tower.l1(&avg)), log_holder: log_holder(&tower, &avg) });
        }
    }
    let c_d = distortion_constant(&sys.table);
    let z = tower.integral(&avg);
    avg.iter_mut().for_each(|x| *x /= z);
    let density = DensityOnI { t, levels: tower.levels, cells: tower.cells(&avg), tail_bound: tower.reservoir * tower.top_average(&avg) };
    Ok(AveragedReport { t, lambda, steps, holder_bound: t * c_d, density, values: avg })
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaProfile {
    pub n: usize,
    /// (delta, mass of the normalized iterate in [0, delta))
    pub masses: Vec<(f64, f64)>,
}

/// Normalized pushforwards of Lebesgue at t = 1 and their mass near 0.
pub fn delta0_diagnostic(sys: &InducedSystem, ns: &[usize], deltas: &[f64], levels: usize, m: usize) -> Result<Vec<DeltaProfile>> {
    delta_profiles(sys, 1.0, 0.0, ns, deltas, levels, m)
}

/// Mass profiles of normalized iterates for any (t, p).
pub fn delta_profiles(sys: &InducedSystem, t: f64, p: f64, ns: &[usize], deltas: &[f64], levels: usize, m: usize) -> Result<Vec<DeltaProfile>> {
    let tower = Tower::new(sys, t, p, levels, m)?;
    let n_last = ns.iter().copied().max().unwrap_or(0);
    let mut psi = tower.ones();
    let mut out = Vec::new();
    for n in 0..=n_last {
        if n > 0 {
            psi = tower.apply(&psi);
            let nrm = tower.l1(&psi);
            if !(nrm > 0.0) {
                return Err(Error::NoConvergence(format!("iterate vanished at step {n}")));
            }
            psi.iter_mut().for_each(|x| *x /= nrm);
        }
        if ns.contains(&n) {
            let tot = tower.integral(&psi);
            let masses = deltas.iter().map(|&dl| (dl, tower.integral_below(&psi, dl) / tot)).collect();
            out.push(DeltaProfile { n, masses });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistogramReport {
    pub bins: usize,
    pub samples: u64,
    pub seed: u64,
    pub l1_distance: f64,
    pub histogram: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// Compares the invariant density of the induced map at t = 1 (right vector of
/// the closed operator) with a histogram of one long orbit of F.
pub fn birkhoff_histogram(sys: &InducedSystem, samples: u64, bins: usize, seed: u64, m: usize) -> Result<HistogramReport> {
    if sys.hole.is_some() {
        return Err(invalid!("the histogram oracle needs the closed system"));
    }
    let op = assemble(sys, &PotentialSpec::closed(1.0, 0.0), m)?;
    let eig = leading_eigen(&op)?;
    let mut predicted = vec![0.0; bins];
    let sub = 32;
    for (b, slot) in predicted.iter_mut().enumerate() {
        for s in 0..sub {
            let y = 0.5 + 0.5 * (b as f64 + (s as f64 + 0.5) / sub as f64) / bins as f64;
            *slot += op.grid.interp(&eig.right, y).max(0.0);
        }
    }
    let z: f64 = predicted.iter().sum();
    predicted.iter_mut().for_each(|v| *v /= z);
    let table = &sys.table;
    let pr = table.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: f64 = 0.5 + 0.5 * rng.gen::<f64>();
    let mut hist = vec![0u64; bins];
    let step = |x: f64| -> f64 {
        match table.branch_at(x) {
            Some(n) => table.forward(n, x).clamp(0.5, 1.0),
            None => {
                // deeper than the table: run the map itself
                let mut z = 2.0 * x - 1.0;
                let mut guard = 0;
                while z < 0.5 && guard < 10_000_000 {
                    z = crate::map_core::left_map(pr, z);
                    guard += 1;
                }
                z.clamp(0.5, 1.0)
            }
        }
    };
    for _ in 0..1000 {
        x = step(x);
    }
    for _ in 0..samples {
        x = step(x);
        let b = (((x - 0.5) * 2.0 * bins as f64) as usize).min(bins - 1);
        hist[b] += 1;
    }
    let histogram: Vec<f64> = hist.iter().map(|&c| c as f64 / samples as f64).collect();
    let l1_distance = histogram.iter().zip(&predicted).map(|(a, b)| (a - b).abs()).sum();
    Ok(HistogramReport { bins, samples, seed, l1_distance, histogram, predicted })
}
