mod config;
mod output;

use clap::{Parser, Subcommand};
use config::{Flags, RunConfig};
use mpholes::claims::{all_claims, ClaimReport, ClaimsConfig};
use mpholes::error::{Error, Result};
use mpholes::holes::{check_non_swallowing, classify_swallowing, HoleFile, NonSwallowingReport, SwallowingReport};
use mpholes::induced::default_n_max;
use mpholes::map_core::parse_word;
use mpholes::pressure::{
    closed_pressure, dimension_threshold, pressure, punctured_pressure, regime_with_threshold, PressureConfig,
    PressureResult, RegimeReport, RootReport, ThresholdReport,
};
use mpholes::spectra::{
    accim_on_i, assemble, averaged_accim, cylinder_escape, seed_independence, spectral_log_lambda, EscapeOptions, Tower,
};
use mpholes::survivor::{default_battery, stability_sweep, SurvivorConfig, SurvivorSummary};
use mpholes::{Hole, InducedSystem, MapParams, PotentialSpec};
use output::{csv_string, emit, json_string, num, Csv, Meta};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "mpholes", version, about = "Thermodynamics of the open Manneville-Pomeau map")]
struct Cli {
    /// JSON file with the same keys as the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sweeps. Does not change any output.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// p(t), and p^H(t) when a hole is given.
    Pressure(Flags),
    /// Regime, threshold and predicted escape rate at t.
    Regime(Flags),
    /// Escape masses m_t(I^n) from cylinder weights.
    Escape(Flags),
    /// Conditionally invariant density on I.
    Density(Flags),
    /// Stability sweep over a hole family.
    Survivor(Flags),
    /// Swallowing classification and non-swallowing checks.
    Classify(Flags),
    /// Numeric checks of the contraction and golden-mean constants.
    Claims(Flags),
    /// Survivor summaries over a t grid and an epsilon grid.
    Sweep(Flags),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs == 0 {
        return Err(Error::Invalid("--jobs must be positive".into()));
    }
    let (name, flags) = match cli.cmd {
        Cmd::Pressure(f) => ("pressure", f),
        Cmd::Regime(f) => ("regime", f),
        Cmd::Escape(f) => ("escape", f),
        Cmd::Density(f) => ("density", f),
        Cmd::Survivor(f) => ("survivor", f),
        Cmd::Classify(f) => ("classify", f),
        Cmd::Claims(f) => ("claims", f),
        Cmd::Sweep(f) => ("sweep", f),
    };
    let cfg = RunConfig::load(cli.config.as_ref(), flags)?;
    let meta = Meta::new(name, &cfg);
    let jobs = cli.jobs;
    match name {
        "pressure" => emit(&cfg, "pressure.json", &json_string(&meta, &cmd_pressure(&cfg)?)?),
        "regime" => emit(&cfg, "regime.json", &json_string(&meta, &cmd_regime(&cfg)?)?),
        "escape" => emit(&cfg, "escape.csv", &csv_string(&meta, &cmd_escape(&cfg)?)?),
        "density" => emit(&cfg, "density.csv", &csv_string(&meta, &cmd_density(&cfg)?)?),
        "survivor" => emit(&cfg, "survivor.csv", &csv_string(&meta, &cmd_survivor(&cfg, jobs)?)?),
        "classify" => emit(&cfg, "classify.json", &json_string(&meta, &cmd_classify(&cfg)?)?),
        "claims" => {
            let claims = cmd_claims(jobs)?;
            emit(&cfg, "claims.json", &claims_json(&meta, &claims)?)?;
            let failed: Vec<&str> = claims.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::Gate(format!("failed claims: {}", failed.join(", "))))
            }
        }
        _ => emit(&cfg, "sweep.csv", &csv_string(&meta, &cmd_sweep(&cfg, jobs)?)?),
    }
}

fn pcfg(cfg: &RunConfig) -> PressureConfig {
    PressureConfig { order: cfg.order, max_order: cfg.max_order, word_budget: cfg.word_budget, ..PressureConfig::default() }
}

fn closed_system(cfg: &RunConfig) -> Result<InducedSystem> {
    let p = MapParams::thermo(cfg.gamma)?;
    InducedSystem::build(p, None, cfg.n_max.unwrap_or(default_n_max(cfg.gamma)))
}

/// The single hole of `--hole`; families are refused here.
fn one_hole(cfg: &RunConfig) -> Result<Option<Hole>> {
    let Some(file) = cfg.hole_file()? else { return Ok(None) };
    let mut hs = file.holes(MapParams::thermo(cfg.gamma)?)?;
    if hs.len() != 1 {
        return Err(Error::Invalid(format!("expected a single hole, the file describes {}", hs.len())));
    }
    Ok(hs.pop())
}

#[derive(Serialize)]
struct PressureOut {
    t: f64,
    gamma: f64,
    hole: String,
    /// Root of s -> P(t Phi - s tau) for the closed system.
    p: RootReport,
    #[serde(rename = "pH")]
    ph: Option<RootReport>,
    /// Induced pressure of t Phi - p tau; its value should vanish.
    induced_at_root: PressureResult,
}

/// A root whose final enumeration ran out of words is only a lower estimate.
fn gated(r: RootReport) -> Result<RootReport> {
    if r.under_approximation {
        return Err(Error::Gate(format!(
            "word budget exhausted after {} periodic orbits; raise --word-budget",
            r.words
        )));
    }
    Ok(r)
}

fn cmd_pressure(cfg: &RunConfig) -> Result<PressureOut> {
    let t = cfg.t()?;
    let closed = closed_system(cfg)?;
    let pc = pcfg(cfg);
    let p = gated(closed_pressure(&closed, t, &pc)?)?;
    let induced_at_root = pressure(&closed, &PotentialSpec::closed(t, p.value), &pc)?;
    let hole = one_hole(cfg)?;
    let ph = match &hole {
        Some(h) => Some(gated(punctured_pressure(&closed.rehole(Some(h))?, t, &pc)?)?),
        None => None,
    };
    Ok(PressureOut {
        t,
        gamma: cfg.gamma,
        hole: hole.map(|h| h.label()).unwrap_or_else(|| "none".into()),
        p,
        ph,
        induced_at_root,
    })
}

#[derive(Serialize)]
struct RegimeOut {
    report: RegimeReport,
    threshold: ThresholdReport,
    /// e^{log_lambda_pred}.
    lambda: f64,
}

fn cmd_regime(cfg: &RunConfig) -> Result<RegimeOut> {
    let t = cfg.t()?;
    let closed = closed_system(cfg)?;
    let sys = closed.rehole(one_hole(cfg)?.as_ref())?;
    let pc = pcfg(cfg);
    let threshold = dimension_threshold(&sys, &pc)?;
    let report = regime_with_threshold(&sys, t, threshold.t_h, &pc)?;
    Ok(RegimeOut { lambda: report.log_lambda_pred.exp(), report, threshold })
}

fn cmd_escape(cfg: &RunConfig) -> Result<Csv> {
    let t = cfg.t()?;
    let hole = one_hole(cfg)?.ok_or_else(|| Error::Invalid("escape needs --hole".into()))?;
    let markov = hole.as_markov().ok_or_else(|| Error::Invalid("escape needs a Markov hole".into()))?;
    let closed = closed_system(cfg)?;
    let p = gated(closed_pressure(&closed, t, &pcfg(cfg))?)?;
    let tower = Tower::new(&closed, t, p.value, cfg.l_max, cfg.m)?;
    let opts = EscapeOptions { start_prefix: parse_word(&cfg.prefix)?, word_budget: cfg.word_budget };
    let rep = cylinder_escape(&tower, markov, cfg.depth, &opts)?;
    let mut csv = Csv::new(["n", "mass", "lo", "hi", "cylinders"]);
    csv.note("hole", hole.label());
    csv.note("p", num(p.value));
    csv.note("p_error", num(p.error));
    csv.note("slope", num(rep.slope));
    csv.note("slope_power_corrected", num(rep.slope_power_corrected));
    csv.note("budget_hit", rep.budget_hit);
    for pt in &rep.points {
        csv.row(vec![pt.n.to_string(), num(pt.mass), num(pt.lo), num(pt.hi), pt.cylinders.to_string()]);
    }
    Ok(csv)
}

fn cmd_density(cfg: &RunConfig) -> Result<Csv> {
    let t = cfg.t()?;
    let closed = closed_system(cfg)?;
    let sys = closed.rehole(one_hole(cfg)?.as_ref())?;
    let pc = pcfg(cfg);
    let threshold = dimension_threshold(&sys, &pc)?;
    let p = gated(closed_pressure(&closed, t, &pc)?)?;
    let mut csv = Csv::new(["cell_left", "cell_right", "density_value", "reference_weight"]);
    csv.note("hole", sys.hole.as_ref().map(|h| h.label()).unwrap_or_else(|| "none".into()));
    csv.note("tH", num(threshold.t_h));
    csv.note("p", num(p.value));
    let density = if t < threshold.t_h && sys.hole.is_some() {
        let rate = spectral_log_lambda(&sys, t, p.value, cfg.m)?;
        let rep = accim_on_i(&sys, t, p.value, rate.s_star, cfg.l_max, cfg.m)?;
        let op = assemble(&sys, &PotentialSpec::punctured(t, rate.s_star), cfg.m)?;
        csv.note("scheme", "spectral-gap");
        csv.note("pH", num(rate.s_star));
        csv.note("lambda", num(rep.lambda));
        csv.note("gate_eigenvalue", num(rep.gate_eigenvalue));
        csv.note("min_density_outside_hole", num(rep.min_density_outside_hole));
        csv.note("invariance_residual", num(rep.invariance_residual));
        csv.note("gap_estimate", num(rep.gap_estimate));
        csv.note("seed_independence_l1", num(seed_independence(&op, cfg.seed)?));
        rep.density
    } else {
        let rep = averaged_accim(&sys, t, p.value, &cfg.checkpoints, cfg.l_max, cfg.m)?;
        csv.note("scheme", "averaged");
        csv.note("lambda", num(rep.lambda));
        csv.note("holder_bound", num(rep.holder_bound));
        for s in &rep.steps {
            csv.note(&format!("step_{}", s.n), format!("residual={} log_holder={}", num(s.residual), num(s.log_holder)));
        }
        rep.density
    };
    csv.note("tail_bound", num(density.tail_bound));
    for c in &density.cells {
        csv.row(vec![num(c.cell_left), num(c.cell_right), num(c.density_value), num(c.reference_weight)]);
    }
    Ok(csv)
}

/// Survivor pressures keep their own (higher) determinant order; see SurvivorConfig.
fn survivor_cfg(cfg: &RunConfig) -> SurvivorConfig {
    let d = SurvivorConfig::default();
    SurvivorConfig { m: cfg.m, pressure: PressureConfig { word_budget: cfg.word_budget, ..d.pressure }, ..d }
}

fn sweep_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> =
        ["gamma", "t", "epsilon", "pH", "P_te", "log_Lambda", "free_energy", "kac"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=k).map(|i| format!("err_psi_{i}")));
    h
}

fn sweep_row(s: &SurvivorSummary, eps: f64, errors: &[f64]) -> Vec<String> {
    let mut r = vec![num(s.gamma), num(s.t), num(eps), num(s.ph), num(s.p_te), num(s.log_lambda), num(s.free_energy), num(s.kac)];
    r.extend(errors.iter().map(|e| num(*e)));
    r
}

/// Runs one stability sweep per t and appends rows, in the (t, family) order given.
fn sweep_rows(cfg: &RunConfig, family: &[Hole], sizes: &[f64], ts: &[f64], jobs: usize, csv: &mut Csv) -> Result<()> {
    let closed = closed_system(cfg)?;
    let battery = default_battery();
    for (i, f) in battery.iter().enumerate() {
        csv.note(&format!("psi_{}", i + 1), f.label());
    }
    let sc = survivor_cfg(cfg);
    for &t in ts {
        let sw = stability_sweep(&closed, family, t, &battery, &sc, jobs)?;
        csv.note(&format!("t={}_errors_monotone", num(t)), sw.errors_monotone());
        for (row, eps) in sw.rows.iter().zip(sizes) {
            csv.note(
                &format!("t={}_{}", num(t), row.summary.hole),
                format!(
                    "log_lambda_pred={} kac_identity={} gap={} gate={}",
                    num(row.summary.log_lambda_pred),
                    num(row.summary.kac_identity),
                    num(row.summary.gap_estimate),
                    row.summary.gap_gate
                ),
            );
            csv.row(sweep_row(&row.summary, *eps, &row.errors));
        }
    }
    Ok(())
}

fn cmd_survivor(cfg: &RunConfig, jobs: usize) -> Result<Csv> {
    let file = cfg.family_file()?;
    let p = MapParams::thermo(cfg.gamma)?;
    let (family, sizes) = (file.holes(p)?, file.sizes(p)?);
    let mut csv = Csv::new(sweep_header(default_battery().len()));
    sweep_rows(cfg, &family, &sizes, &cfg.t_values()?, jobs, &mut csv)?;
    Ok(csv)
}

fn cmd_sweep(cfg: &RunConfig, jobs: usize) -> Result<Csv> {
    let p = MapParams::thermo(cfg.gamma)?;
    let file = match (cfg.family_file(), cfg.eps_grid.is_empty()) {
        (Ok(HoleFile::Interval { z, .. }), false) => HoleFile::Interval { z, epsilons: cfg.eps_grid.clone() },
        (Ok(f), true) => f,
        (Ok(_), false) => return Err(Error::Invalid("--eps-grid needs an interval hole file".into())),
        (Err(e), _) => return Err(e),
    };
    let (family, sizes) = (file.holes(p)?, file.sizes(p)?);
    if cfg.t_grid.is_empty() {
        return Err(Error::Invalid("sweep needs --t-grid".into()));
    }
    let mut csv = Csv::new(sweep_header(default_battery().len()));
    sweep_rows(cfg, &family, &sizes, &cfg.t_grid, jobs, &mut csv)?;
    Ok(csv)
}

#[derive(Serialize)]
struct ClassifyOut {
    hole: String,
    swallowing: Vec<SwallowingReport>,
    non_swallowing: NonSwallowingReport,
}

fn cmd_classify(cfg: &RunConfig) -> Result<Vec<ClassifyOut>> {
    let file = cfg.hole_file()?.ok_or_else(|| Error::Invalid("classify needs --hole".into()))?;
    let p = MapParams::thermo(cfg.gamma)?;
    file.holes(p)?
        .iter()
        .map(|h| {
            let swallowing = h.intervals().iter().map(|&(a, b)| classify_swallowing(p, a, b)).collect::<Result<_>>()?;
            let n0 = h.as_markov().map(|m| m.n0).unwrap_or(1);
            Ok(ClassifyOut { hole: h.label(), swallowing, non_swallowing: check_non_swallowing(p, h, n0.max(cfg.depth))? })
        })
        .collect()
}

fn cmd_claims(jobs: usize) -> Result<Vec<ClaimReport>> {
    let t0 = std::time::Instant::now();
    let claims = all_claims(&ClaimsConfig::default(), jobs)?;
    // timing goes to stderr only so that outputs stay reproducible
    eprintln!("claims computed in {:.1} s", t0.elapsed().as_secs_f64());
    Ok(claims)
}

#[derive(Serialize)]
struct ClaimOut<'a> {
    #[serde(flatten)]
    claim: &'a ClaimReport,
    meta: &'a Meta<'a>,
}

/// Claims stay a JSON array; each element carries the run metadata.
fn claims_json(meta: &Meta, claims: &[ClaimReport]) -> Result<String> {
    let arr: Vec<ClaimOut> = claims.iter().map(|c| ClaimOut { claim: c, meta }).collect();
    let mut s = serde_json::to_string_pretty(&arr).map_err(|e| Error::Invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
