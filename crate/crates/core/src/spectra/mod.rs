//! Discretized induced transfer operators and what is built on them:
//! leading eigen-data, conformal weights, full-system iteration on a tower of
//! renewal levels, escape masses, accim densities and the averaging scheme.

mod escape;
mod grid;
mod tower;

pub use escape::{cylinder_escape, escape_slope, operator_escape, EscapeOptions, EscapePoint, EscapeReport};
pub use grid::YGrid;
pub use tower::{
    accim_on_i, averaged_accim, birkhoff_histogram, delta0_diagnostic, density_l1, distortion_constant, AccimReport,
    AveragedReport, AveragedStep, DeltaProfile, DensityCell, DensityOnI, HistogramReport, Tower, DEFAULT_LEVELS,
};

use crate::error::{invalid, Error, Result};
use crate::induced::{InducedSystem, PotentialSpec, TailSums};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_M: usize = 512;

/// Breakpoints a grid must respect for this system: dead-set ends, hole ends,
/// and the hole ends pulled back to Y through the level maps and F.
pub fn system_breaks(sys: &InducedSystem) -> Vec<f64> {
    let mut b = sys.breakpoints.clone();
    if let Some(h) = &sys.hole {
        let tab = &sys.table;
        for (lo, hi) in h.intervals() {
            for e in [lo, hi] {
                if e > 0.5 && e < 1.0 {
                    b.push(e);
                    if let Some(n) = tab.branch_at(e) {
                        b.push(tab.forward(n, e));
                    }
                } else if e > 0.0 && e < 0.5 {
                    if let Some(k) = tab.renewal.locate(e).filter(|k| *k <= tab.n_max) {
                        b.push(tab.z_inverse(k, e));
                    }
                }
            }
        }
    }
    b
}

/// Calls `f(n, xi_n(y), weight)` for every branch alive on segment `mid`,
/// with n = N_max + 1 for the lumped tail.
#[inline]
pub(crate) fn for_each_branch(
    sys: &InducedSystem,
    spec: &PotentialSpec,
    tail: Option<&TailSums>,
    y: f64,
    mid: f64,
    mut f: impl FnMut(usize, f64, f64),
) {
    let n_max = sys.n_max();
    for n in 0..=n_max {
        if spec.punctured && !sys.survives(n, mid) {
            continue;
        }
        let (xi, l) = sys.table.xi_logdf(n, y);
        let w = (-spec.t * l - spec.s * (n + 1) as f64 + spec.shift).exp();
        f(n, xi, w);
    }
    if let Some(ts) = tail {
        if spec.punctured && !sys.survives(n_max + 1, mid) {
            return;
        }
        let w = sys.log_weight(spec, n_max, y).exp() * ts.s0;
        f(n_max + 1, sys.tail_xi(), w);
    }
}

/// Collocation matrix of the induced operator on hat functions.
#[derive(Clone, Debug)]
pub struct DiscretizedOperator {
    pub grid: YGrid,
    pub spec: PotentialSpec,
    a: Vec<f64>,
    /// Largest row weight carried by the lumped tail.
    pub tail_mass: f64,
    pub tail: TailSums,
}

pub fn assemble(sys: &InducedSystem, spec: &PotentialSpec, m: usize) -> Result<DiscretizedOperator> {
    spec.validate()?;
    if m < 64 {
        return Err(invalid!("operator grid needs M >= 64, got {m}"));
    }
    let tail = sys
        .tail
        .sums(spec.t, spec.s)
        .ok_or_else(|| invalid!("branch weights are not summable at t = {}, s = {}", spec.t, spec.s))?;
    let grid = YGrid::new(&system_breaks(sys), m)?;
    let d = grid.len();
    let mut a = vec![0.0; d * d];
    let mut tail_mass: f64 = 0.0;
    let n_max = sys.n_max();
    for i in 0..d {
        let y = grid.nodes[i];
        let mid = grid.seg_mid(grid.seg[i]);
        let row = &mut a[i * d..(i + 1) * d];
        for_each_branch(sys, spec, Some(&tail), y, mid, |n, xi, w| {
            let (j, f) = grid.locate(xi);
            row[j] += w * (1.0 - f);
            row[j + 1] += w * f;
            if n > n_max {
                tail_mass = tail_mass.max(w);
            }
        });
    }
    Ok(DiscretizedOperator { grid, spec: *spec, a, tail_mass, tail })
}

impl DiscretizedOperator {
    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.dim() + j]
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.a.chunks_exact(d).map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for (row, &vi) in self.a.chunks_exact(d).zip(v) {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
        out
    }

    /// Same operator on a grid of 2M nodes.
    pub fn refined(&self, sys: &InducedSystem) -> Result<DiscretizedOperator> {
        let m = self.grid.nodes.len();
        assemble(sys, &self.spec, 2 * m)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralData {
    pub lambda: f64,
    /// Right vector at the nodes, normalized so that sum(left * right) = 1.
    pub right: Vec<f64>,
    /// Node weights of the conformal measure, summing to 1.
    pub left: Vec<f64>,
    pub residual: f64,
    pub left_residual: f64,
    /// |lambda_2| / lambda from a deflated iteration (diagnostic only).
    pub gap_estimate: f64,
    pub iterations: usize,
    /// |l.(A r) - lambda l.r|.
    pub duality_error: f64,
}

const MAX_ITER: usize = 40_000;

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Power iteration for a nonnegative operator; returns (lambda, vector with unit l1 norm, iterations).
pub fn power_iteration(apply: impl Fn(&[f64]) -> Vec<f64>, start: Vec<f64>, tol: f64) -> Result<(f64, Vec<f64>, usize)> {
    let mut v = start;
    let n0 = l1(&v);
    if !(n0 > 0.0) {
        return Err(invalid!("start vector is zero"));
    }
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lam = 0.0;
    for it in 1..=MAX_ITER {
        let mut w = apply(&v);
        let nw = l1(&w);
        if !(nw > 0.0) || !nw.is_finite() {
            return Err(Error::NoConvergence(format!("iterate vanished or overflowed at step {it}")));
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let diff: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = w;
        lam = nw;
        if diff < tol {
            return Ok((lam, v, it));
        }
    }
    let _ = lam;
    Err(Error::NoConvergence(format!("power iteration did not settle in {MAX_ITER} steps")))
}

pub fn leading_eigen(op: &DiscretizedOperator) -> Result<SpectralData> {
    leading_eigen_seeded(op, None)
}

/// As `leading_eigen`, with the left iteration started from a seeded random vector.
pub fn leading_eigen_seeded(op: &DiscretizedOperator, seed: Option<u64>) -> Result<SpectralData> {
    let d = op.dim();
    let tol = 1e-13;
    let (lam, mut r, it_r) = power_iteration(|v| op.apply(v), vec![1.0; d], tol)?;
    let start = match seed {
        None => vec![1.0; d],
        Some(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            (0..d).map(|_| rng.gen::<f64>() + 0.01).collect()
        }
    };
    let (lam_l, left, it_l) = power_iteration(|v| op.apply_transpose(v), start, tol)?;
    let pair: f64 = left.iter().zip(&r).map(|(a, b)| a * b).sum();
    if !(pair > 0.0) {
        return Err(Error::NoConvergence("left and right vectors are orthogonal".into()));
    }
    r.iter_mut().for_each(|x| *x /= pair);
    let ar = op.apply(&r);
    let residual = ar.iter().zip(&r).map(|(a, b)| (a - lam * b).abs()).sum::<f64>() / l1(&r);
    let al = op.apply_transpose(&left);
    let left_residual = al.iter().zip(&left).map(|(a, b)| (a - lam * b).abs()).sum::<f64>();
    let duality_error = (left.iter().zip(&ar).map(|(a, b)| a * b).sum::<f64>() - lam).abs();
    let _ = lam_l;
    let gap_estimate = deflated_ratio(op, lam, &r, &left);
    Ok(SpectralData { lambda: lam, right: r, left, residual, left_residual, gap_estimate, iterations: it_r + it_l, duality_error })
}

/// Growth rate of A - lambda r l^T from a fixed pseudo-random start, over lambda.
fn deflated_ratio(op: &DiscretizedOperator, lam: f64, r: &[f64], l: &[f64]) -> f64 {
    let d = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a9);
    let mut v: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() - 0.5).collect();
    let project = |v: &mut Vec<f64>| {
        let c: f64 = l.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(r).for_each(|(x, ri)| *x -= c * ri);
    };
    project(&mut v);
    let n0 = l1(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let (steps, keep) = (400, 150);
    let mut logs = 0.0;
    for k in 0..steps {
        let mut w = op.apply(&v);
        project(&mut w);
        let n = l1(&w);
        if !(n > 0.0) {
            return 0.0;
        }
        if k >= steps - keep {
            logs += n.ln();
        }
        v = w.into_iter().map(|x| x / n).collect();
    }
    (logs / keep as f64).exp() / lam
}

/// Leading eigenvalue only (right power iteration).
pub fn leading_value(op: &DiscretizedOperator) -> Result<f64> {
    Ok(power_iteration(|v| op.apply(v), vec![1.0; op.dim()], 1e-12)?.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralRate {
    /// Root s* of lambda(s) = 1 for the punctured induced operator.
    pub s_star: f64,
    /// log lambda = s* - p(t).
    pub log_lambda: f64,
    pub evaluations: usize,
}

/// Escape rate of the open system from the induced operator with weights
/// lambda^{-tau}: the eigenvalue of e^{t Phi - s tau} on the surviving branches
/// equals 1 at s = p(t) + log lambda.
pub fn spectral_log_lambda(sys: &InducedSystem, t: f64, p_t: f64, m: usize) -> Result<SpectralRate> {
    let mut evals = 0;
    let mut f = |s: f64| -> Result<f64> {
        evals += 1;
        let op = assemble(sys, &PotentialSpec::punctured(t, s), m)?;
        Ok(leading_value(&op)?.ln())
    };
    let mut hi = p_t;
    let mut f_hi = f(hi)?;
    let mut lo = hi;
    let mut f_lo = f_hi;
    let mut step = 0.05;
    while f_lo < 0.0 {
        hi = lo;
        f_hi = f_lo;
        lo -= step;
        step *= 2.0;
        if lo < -2.0 {
            return Err(Error::Root("no root of lambda(s) = 1 above s = -2".into()));
        }
        f_lo = f(lo)?;
    }
    while f_hi > 0.0 {
        lo = hi;
        hi += step;
        step *= 2.0;
        f_hi = f(hi)?;
    }
    let mut g = |s: f64| f(s).unwrap_or(f64::NAN);
    let s_star = crate::roots::illinois(&mut g, lo, hi, 1e-10)?;
    Ok(SpectralRate { s_star, log_lambda: s_star - p_t, evaluations: evals })
}

/// Conformal measure node weights (the left vector, summing to one).
pub fn conformal_weights(data: &SpectralData) -> Vec<f64> {
    let s: f64 = data.left.iter().sum();
    data.left.iter().map(|x| x / s).collect()
}

/// Conformal mass of every branch domain Y_n, n = 0..=N_max, plus the tail:
/// m(Y_n) = lambda^{-1} int w_n dm.
pub fn branch_masses(sys: &InducedSystem, op: &DiscretizedOperator, data: &SpectralData) -> Vec<f64> {
    let mut out = vec![0.0; sys.n_max() + 2];
    let w = conformal_weights(data);
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let y = op.grid.nodes[i];
        let mid = op.grid.seg_mid(op.grid.seg[i]);
        for_each_branch(sys, &op.spec, Some(&op.tail), y, mid, |n, _, wt| out[n] += wi * wt / data.lambda);
    }
    out
}

/// Log-log slope of m(Y_n) e^{n s} against n over [lo, hi].
pub fn branch_mass_slope(masses: &[f64], s: f64, lo: usize, hi: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (lo..=hi.min(masses.len() - 2))
        .filter(|&n| masses[n] > 0.0)
        .map(|n| ((n as f64).ln(), masses[n].ln() + s * (n + 1) as f64))
        .collect();
    crate::stats::ls_slope(&pts)
}

/// l1 distance between left vectors started from ones and from a seeded random vector.
pub fn seed_independence(op: &DiscretizedOperator, seed: u64) -> Result<f64> {
    let a = leading_eigen(op)?;
    let b = leading_eigen_seeded(op, Some(seed))?;
    Ok(a.left.iter().zip(&b.left).map(|(x, y)| (x - y).abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_core::MapParams;

    #[test]
    fn power_iteration_on_full_shift() {
        // two branches with unit weights: every row sums to 2
        let (lam, v, _) = power_iteration(|v| vec![v[0] + v[1], v[0] + v[1]], vec![1.0, 0.3], 1e-14).unwrap();
        assert!((lam - 2.0).abs() < 1e-12);
        assert!((v[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn t1_closed_left_vector_is_lebesgue() {
        let sys = InducedSystem::build(MapParams::new(0.5).unwrap(), None, 400).unwrap();
        let op = assemble(&sys, &PotentialSpec::closed(1.0, 0.0), 128).unwrap();
        let d = leading_eigen(&op).unwrap();
        assert!((d.lambda - 1.0).abs() < 2e-3, "lambda {}", d.lambda);
        let hat = op.grid.hat_weights();
        let tot: f64 = hat.iter().sum();
        let err: f64 = d.left.iter().zip(&hat).map(|(a, b)| (a - b / tot).abs()).sum();
        assert!(err < 2e-2, "left vector vs Lebesgue {err}");
        assert!(d.duality_error < 1e-10);
    }
}
