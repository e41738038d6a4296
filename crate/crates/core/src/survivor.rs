//! Invariant measures on the survivor set.
//!
//! With P_te the closed induced pressure of t Phi - tau p^H(t), the punctured
//! operator for t Phi - tau p^H - P_te has leading eigenvalue Lambda and
//! eigen-data (g, e). The induced survivor measure is nu_Y(psi) = e(psi g) / e(g),
//! spread over I along return orbits and normalized by the mean return time.

use crate::error::{invalid, Error, Result};
use crate::induced::{InducedSystem, PotentialSpec};
use crate::pressure::{closed_pressure, pressure, punctured_pressure, PressureConfig};
use crate::spectra::{assemble, for_each_branch, leading_eigen, DiscretizedOperator, SpectralData, DEFAULT_M};
use crate::jobs::run_jobs;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SurvivorConfig {
    pub m: usize,
    /// Heuristic stand-in for "hole small enough": refuse when |lambda_2|/lambda exceeds this.
    pub gap_gate: f64,
    pub pressure: PressureConfig,
    pub ph_source: PhSource,
}

/// Where p^H(t) comes from. Both values are always reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhSource {
    /// Periodic-orbit root from the pressure module.
    Orbit,
    /// Zero of log lambda(s) for the discretized punctured operator.
    Spectral,
}

impl Default for SurvivorConfig {
    fn default() -> Self {
        SurvivorConfig {
            m: DEFAULT_M,
            gap_gate: 0.95,
            pressure: PressureConfig { order: 5, ..PressureConfig::default() },
            ph_source: PhSource::Spectral,
        }
    }
}

/// A function on I used to probe the measures.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TestFn {
    Monomial { degree: u32 },
    Indicator { lo: f64, hi: f64 },
}

impl TestFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFn::Monomial { degree } => x.powi(degree as i32),
            TestFn::Indicator { lo, hi } => {
                if x >= lo && x < hi || (hi >= 1.0 && x >= lo) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            TestFn::Monomial { degree } => format!("x^{degree}"),
            TestFn::Indicator { lo, hi } => format!("1[{lo},{hi})"),
        }
    }
}

/// x, x^2 and the indicators of [0,1/2), [1/2,3/4), [3/4,1].
pub fn default_battery() -> Vec<TestFn> {
    vec![
        TestFn::Monomial { degree: 1 },
        TestFn::Monomial { degree: 2 },
        TestFn::Indicator { lo: 0.0, hi: 0.5 },
        TestFn::Indicator { lo: 0.5, hi: 0.75 },
        TestFn::Indicator { lo: 0.75, hi: 1.0 },
    ]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivorSummary {
    pub gamma: f64,
    pub t: f64,
    pub hole: String,
    /// Lebesgue measure of the hole (0 without one).
    pub epsilon: f64,
    #[serde(rename = "pH")]
    pub ph: f64,
    #[serde(rename = "pH_transient")]
    pub ph_transient: bool,
    #[serde(rename = "pH_orbit")]
    pub ph_orbit: f64,
    #[serde(rename = "pH_spectral")]
    pub ph_spectral: f64,
    /// P(t Phi - tau p^H), closed system, from orbit sums.
    pub p_te: f64,
    /// P(t Phi^H - tau p^H), punctured system, from orbit sums.
    pub p_hole_te: f64,
    pub log_lambda: f64,
    /// p_hole_te - p_te; should match log_lambda.
    pub log_lambda_pred: f64,
    pub gap_estimate: f64,
    /// Labels the gate as a heuristic in every output.
    pub gap_gate: String,
    pub eigen_residual: f64,
    /// int tau d nu_Y.
    pub kac: f64,
    /// nu_H(Y) from the projected measure.
    pub nu_h_y: f64,
    pub kac_identity: f64,
    pub free_energy: f64,
    /// Conformal mass of the dead set and its first preimage.
    pub perturbation_size: f64,
    /// Share of the Kac sum carried by the lumped tail.
    pub tail_share: f64,
    /// Fitted exponent of nu_Y(Y_k) e^{(k+1) p^H} against k, and the predicted -t(1/gamma + 1).
    pub branch_decay_exponent: f64,
    pub branch_decay_predicted: f64,
}

#[derive(Clone, Debug)]
pub struct SurvivorMeasure {
    pub summary: SurvivorSummary,
    sys: InducedSystem,
    op: DiscretizedOperator,
    data: SpectralData,
    /// sum of e_i w_n(y_i) g(xi_n y_i) over everything, i.e. e(g) Lambda.
    norm: f64,
}

fn kac_denominator(sys: &InducedSystem, op: &DiscretizedOperator, data: &SpectralData) -> Result<(f64, f64, f64, Vec<f64>)> {
    let n_max = sys.n_max();
    let extra = if op.tail.s0 > 0.0 { op.tail.s1 / op.tail.s0 } else { 0.0 };
    if !extra.is_finite() {
        return Err(Error::NoConvergence("mean return time diverges in the lumped tail".into()));
    }
    let mut mass = 0.0;
    let mut tau_sum = 0.0;
    let mut tail_tau = 0.0;
    let mut branch = vec![0.0; n_max + 2];
    for (i, &ei) in data.left.iter().enumerate() {
        if ei == 0.0 {
            continue;
        }
        let y = op.grid.nodes[i];
        let mid = op.grid.seg_mid(op.grid.seg[i]);
        for_each_branch(sys, &op.spec, Some(&op.tail), y, mid, |n, xi, w| {
            let v = ei * w * op.grid.interp(&data.right, xi);
            let tau = if n > n_max { n_max as f64 + 1.0 + extra } else { n as f64 + 1.0 };
            mass += v;
            tau_sum += v * tau;
            branch[n] += v;
            if n > n_max {
                tail_tau += v * tau;
            }
        });
    }
    Ok((mass, tau_sum, tail_tau, branch))
}

/// Builds the survivor measure of `sys` at t. Without a hole this is the
/// closed equilibrium state (Lambda = 1).
pub fn build_survivor(sys: &InducedSystem, closed: &InducedSystem, t: f64, cfg: &SurvivorConfig) -> Result<SurvivorMeasure> {
    if closed.hole.is_some() {
        return Err(invalid!("reference system must have no hole"));
    }
    if !(0.0..1.0).contains(&t) {
        return Err(Error::Domain(format!("survivor measures need t in [0,1), got {t}")));
    }
    let root = match sys.hole {
        Some(_) => punctured_pressure(sys, t, &cfg.pressure)?,
        None => closed_pressure(sys, t, &cfg.pressure)?,
    };
    let ph_orbit = root.value.max(0.0);
    let ph_spectral = if root.transient { 0.0 } else { spectral_root(sys, t, ph_orbit, cfg.m)? };
    let ph = match cfg.ph_source {
        PhSource::Orbit => ph_orbit,
        PhSource::Spectral => ph_spectral,
    };
    let p_te = pressure(closed, &PotentialSpec::closed(t, ph), &cfg.pressure)?.value;
    let p_hole_te = if sys.hole.is_some() {
        pressure(sys, &PotentialSpec::punctured(t, ph), &cfg.pressure)?.value
    } else {
        p_te
    };
    let spec = PotentialSpec::punctured(t, ph).with_shift(-p_te);
    let op = assemble(sys, &spec, cfg.m)?;
    let data = leading_eigen(&op)?;
    if sys.hole.is_some() && data.gap_estimate >= cfg.gap_gate {
        return Err(Error::Gate(format!(
            "hole too large: |lambda_2|/lambda = {:.4} is not below the heuristic gate {}",
            data.gap_estimate, cfg.gap_gate
        )));
    }
    let (norm, tau_sum, tail_tau, branch) = kac_denominator(sys, &op, &data)?;
    if !(norm > 0.0) {
        return Err(Error::NoConvergence("survivor functional vanished".into()));
    }
    let kac = tau_sum / norm;
    let perturbation_size = perturbation(sys, closed, t, ph, p_te, cfg.m)?;
    let pr = sys.params();
    let n_max = sys.n_max();
    let pts: Vec<(f64, f64)> = (20..=n_max / 2)
        .filter(|&k| branch[k] > 0.0)
        .map(|k| ((k as f64).ln(), (branch[k] / norm).ln() + (k + 1) as f64 * ph))
        .collect();
    let branch_decay_exponent = if pts.len() >= 2 { crate::stats::ls_slope(&pts) } else { f64::NAN };
    let mut sm = SurvivorMeasure {
        summary: SurvivorSummary {
            gamma: pr.gamma,
            t,
            hole: sys.hole.as_ref().map(|h| h.label()).unwrap_or_else(|| "none".into()),
            epsilon: sys.hole.as_ref().map(|h| h.measure()).unwrap_or(0.0),
            ph,
            ph_transient: root.transient,
            ph_orbit,
            ph_spectral,
            p_te,
            p_hole_te,
            log_lambda: data.lambda.ln(),
            log_lambda_pred: p_hole_te - p_te,
            gap_estimate: data.gap_estimate,
            gap_gate: format!("heuristic: gap_estimate < {}", cfg.gap_gate),
            eigen_residual: data.residual,
            kac,
            nu_h_y: 0.0,
            kac_identity: 0.0,
            free_energy: 0.0,
            perturbation_size,
            tail_share: tail_tau / tau_sum,
            branch_decay_exponent,
            branch_decay_predicted: -t * (1.0 / pr.gamma + 1.0),
        },
        sys: sys.clone(),
        op,
        data,
        norm,
    };
    let nu_h_y = sm.nu_h(&TestFn::Indicator { lo: 0.5, hi: 1.0 });
    sm.summary.nu_h_y = nu_h_y;
    sm.summary.kac_identity = nu_h_y * kac;
    sm.summary.free_energy = free_energy(&sm);
    Ok(sm)
}

/// s with lambda(s) = 1 for the punctured operator of sys (closed when sys has no hole).
fn spectral_root(sys: &InducedSystem, t: f64, guess: f64, m: usize) -> Result<f64> {
    Ok(crate::spectra::spectral_log_lambda(sys, t, guess, m)?.s_star.max(0.0))
}

/// Conformal mass of H~ union F^{-1} H~, where H~ is the set of points of Y
/// whose first return block meets the hole.
fn perturbation(sys: &InducedSystem, closed: &InducedSystem, t: f64, ph: f64, p_te: f64, m: usize) -> Result<f64> {
    if sys.hole.is_none() {
        return Ok(0.0);
    }
    let op = assemble(closed, &PotentialSpec::closed(t, ph).with_shift(-p_te), m)?;
    let data = leading_eigen(&op)?;
    let tab = &sys.table;
    let in_dead = |y: f64| match tab.branch_at(y) {
        Some(n) => !sys.survives(n, tab.forward(n, y)),
        None => false,
    };
    let n_max = sys.n_max();
    let mut out = 0.0;
    for (i, &ei) in data.left.iter().enumerate() {
        let y = op.grid.nodes[i];
        let mid = op.grid.seg_mid(op.grid.seg[i]);
        let y_dead = in_dead(y);
        for_each_branch(closed, &op.spec, Some(&op.tail), y, mid, |n, _, w| {
            if y_dead || !sys.survives(n.min(n_max + 1), mid) {
                out += ei * w;
            }
        });
    }
    Ok(out / data.lambda)
}

impl SurvivorMeasure {
    pub fn lambda(&self) -> f64 {
        self.data.lambda
    }

    /// nu_Y(psi) for psi on Y.
    pub fn nu_y(&self, psi: &TestFn) -> f64 {
        self.pair(|xi, _, _| psi.eval(xi))
    }

    /// nu_Y(psi o F) for psi on Y.
    pub fn nu_y_pushed(&self, psi: &TestFn) -> f64 {
        self.pair(|_, y, _| psi.eval(y))
    }

    /// Sum over atoms (xi_n(y_i), y_i, n) of e_i w_n g(xi) h, over the total.
    fn pair(&self, h: impl Fn(f64, f64, usize) -> f64) -> f64 {
        let op = &self.op;
        let mut acc = 0.0;
        for (i, &ei) in self.data.left.iter().enumerate() {
            if ei == 0.0 {
                continue;
            }
            let y = op.grid.nodes[i];
            let mid = op.grid.seg_mid(op.grid.seg[i]);
            for_each_branch(&self.sys, &op.spec, Some(&op.tail), y, mid, |n, xi, w| {
                acc += ei * w * op.grid.interp(&self.data.right, xi) * h(xi, y, n);
            });
        }
        acc / self.norm
    }

    /// nu_H(psi): nu_Y-mass spread over each return orbit, over the Kac factor.
    pub fn nu_h(&self, psi: &TestFn) -> f64 {
        let sys = &self.sys;
        let op = &self.op;
        let tab = &sys.table;
        let n_max = sys.n_max();
        let extra = if op.tail.s0 > 0.0 { op.tail.s1 / op.tail.s0 } else { 0.0 };
        let deep = psi.eval(0.5 * tab.renewal.ell[n_max]);
        let mut acc = 0.0;
        let mut suffix = vec![0.0; n_max + 2];
        for (i, &ei) in self.data.left.iter().enumerate() {
            if ei == 0.0 {
                continue;
            }
            let y = op.grid.nodes[i];
            let mid = op.grid.seg_mid(op.grid.seg[i]);
            suffix.iter_mut().for_each(|v| *v = 0.0);
            for_each_branch(sys, &op.spec, Some(&op.tail), y, mid, |n, xi, w| {
                let v = ei * w * op.grid.interp(&self.data.right, xi);
                acc += v * psi.eval(xi);
                suffix[n.min(n_max + 1)] += v;
                if n > n_max {
                    acc += v * extra * deep;
                }
            });
            // psi(z_j(y)) is visited by every branch n >= j
            let mut run = 0.0;
            for j in (1..=n_max + 1).rev() {
                run += suffix[j];
                if j <= n_max && run > 0.0 {
                    acc += run * psi.eval(tab.z(j, y));
                }
            }
        }
        acc / (self.norm * self.summary.kac)
    }

    /// nu_H-mass of the renewal cells [l_k, l_{k-1}) for k = 1..=depth, of
    /// [0, l_depth), and of `y_bins` equal cells of Y. Masses sum to 1.
    pub fn project_to_i(&self, depth: usize, y_bins: usize) -> Vec<(f64, f64, f64)> {
        let ell = &self.sys.table.renewal.ell;
        let depth = depth.min(self.sys.n_max());
        let mut out = vec![(0.0, ell[depth], self.nu_h(&TestFn::Indicator { lo: 0.0, hi: ell[depth] }))];
        for k in (1..=depth).rev() {
            out.push((ell[k], ell[k - 1], self.nu_h(&TestFn::Indicator { lo: ell[k], hi: ell[k - 1] })));
        }
        for b in 0..y_bins {
            let lo = 0.5 + 0.5 * b as f64 / y_bins as f64;
            let hi = 0.5 + 0.5 * (b + 1) as f64 / y_bins as f64;
            out.push((lo, hi, self.nu_h(&TestFn::Indicator { lo, hi })));
        }
        out
    }

    /// max over the battery of |nu_Y(psi o F) - nu_Y(psi)|, restricted to Y.
    pub fn invariance_defect(&self) -> f64 {
        let fns = [
            TestFn::Monomial { degree: 1 },
            TestFn::Monomial { degree: 2 },
            TestFn::Indicator { lo: 0.55, hi: 0.7 },
            TestFn::Indicator { lo: 0.8, hi: 0.95 },
        ];
        fns.iter().map(|f| (self.nu_y_pushed(f) - self.nu_y(f)).abs()).fold(0.0, f64::max)
    }
}

/// P(t Phi^H - tau p^H) nu_H(Y) + p^H, with the punctured pressure taken from
/// the eigenvalue: log Lambda + P_te.
pub fn free_energy(sm: &SurvivorMeasure) -> f64 {
    let s = &sm.summary;
    (s.log_lambda + s.p_te) * s.nu_h_y + s.ph
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub summary: SurvivorSummary,
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilitySweep {
    pub gamma: f64,
    pub t: f64,
    pub battery: Vec<String>,
    /// mu_t(psi) for the closed system.
    pub reference: Vec<f64>,
    pub rows: Vec<SweepRow>,
}

impl StabilitySweep {
    /// True when |nu_H(psi) - mu_t(psi)| decreases along the family for every psi.
    pub fn errors_monotone(&self) -> bool {
        (0..self.battery.len()).all(|j| self.rows.windows(2).all(|w| w[1].errors[j] <= w[0].errors[j]))
    }
}

/// Survivor summaries for a family of holes, largest first, plus the errors
/// against the closed equilibrium. Members run on `jobs` threads; the rows keep
/// the family order.
pub fn stability_sweep(
    closed: &InducedSystem,
    family: &[crate::holes::Hole],
    t: f64,
    battery: &[TestFn],
    cfg: &SurvivorConfig,
    jobs: usize,
) -> Result<StabilitySweep> {
    let reference = build_survivor(closed, closed, t, cfg)?;
    let mu: Vec<f64> = battery.iter().map(|f| reference.nu_h(f)).collect();
    let rows = run_jobs(family.len(), jobs, |i| -> Result<SweepRow> {
        let sys = closed.rehole(Some(&family[i]))?;
        let sm = build_survivor(&sys, closed, t, cfg)?;
        let values: Vec<f64> = battery.iter().map(|f| sm.nu_h(f)).collect();
        let errors = values.iter().zip(&mu).map(|(a, b)| (a - b).abs()).collect();
        Ok(SweepRow { summary: sm.summary, values, errors })
    })?;
    Ok(StabilitySweep { gamma: closed.params().gamma, t, battery: battery.iter().map(|f| f.label()).collect(), reference: mu, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_closes_at_one() {
        let f = TestFn::Indicator { lo: 0.75, hi: 1.0 };
        assert_eq!(f.eval(1.0), 1.0);
        assert_eq!(f.eval(0.7), 0.0);
        let g = TestFn::Indicator { lo: 0.0, hi: 0.5 };
        assert_eq!(g.eval(0.5), 0.0);
    }
}
