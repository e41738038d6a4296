//! Browser demo: pressure curves, escape masses and the swallowing classifier.
//! Every export returns a JSON string; errors come back as `{"error": ...}`.

use mpholes::holes::{classify_swallowing, Hole};
use mpholes::induced::InducedSystem;
use mpholes::pressure::{closed_pressure, PressureConfig};
use mpholes::spectra::{cylinder_escape, EscapeOptions, Tower};
use mpholes::MapParams;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

// small tables keep the page responsive
const N_MAX: usize = 600;
const M: usize = 96;
const LEVELS: usize = 150;

fn pcfg() -> PressureConfig {
    PressureConfig { order: 4, max_order: 4, word_budget: 2_000_000, ..PressureConfig::default() }
}

fn reply(r: mpholes::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn curve(gamma: f64, points: usize) -> mpholes::Result<Value> {
    let points = points.clamp(2, 21);
    let sys = InducedSystem::build(MapParams::thermo(gamma)?, None, N_MAX)?;
    let mut ts = Vec::new();
    let mut ps = Vec::new();
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        ts.push(t);
        ps.push(closed_pressure(&sys, t, &pcfg())?.value);
    }
    Ok(json!({ "gamma": gamma, "t": ts, "p": ps }))
}

/// p(t) on `points` evenly spaced t in [0, 1].
#[wasm_bindgen]
pub fn pressure_curve(gamma: f64, points: usize) -> String {
    reply(curve(gamma, points))
}

fn escape(gamma: f64, t: f64, n0: usize, cells: &str, depth: usize) -> mpholes::Result<Value> {
    let p = MapParams::thermo(gamma)?;
    let cells: Vec<&str> = cells.split(',').map(str::trim).filter(|c| !c.is_empty()).collect();
    let hole = Hole::markov(p, n0, &cells)?;
    let markov = hole.as_markov().expect("built as Markov");
    let sys = InducedSystem::build(p, None, N_MAX)?;
    let pt = closed_pressure(&sys, t, &pcfg())?;
    let tower = Tower::new(&sys, t, pt.value, LEVELS, M)?;
    let opts = EscapeOptions { start_prefix: Vec::new(), word_budget: 2_000_000 };
    let rep = cylinder_escape(&tower, markov, depth.clamp(1, 16), &opts)?;
    Ok(json!({
        "hole": hole.label(),
        "p": pt.value,
        "slope": rep.slope,
        "n": rep.points.iter().map(|q| q.n).collect::<Vec<_>>(),
        "mass": rep.points.iter().map(|q| q.mass).collect::<Vec<_>>(),
    }))
}

/// Escape masses m_t(I^n) for a Markov hole given as comma-separated cells.
#[wasm_bindgen]
pub fn escape_masses(gamma: f64, t: f64, n0: usize, cells: &str, depth: usize) -> String {
    reply(escape(gamma, t, n0, cells, depth))
}

/// Swallowing case of the interval hole (a, b).
#[wasm_bindgen]
pub fn classify(gamma: f64, a: f64, b: f64) -> String {
    reply(MapParams::new(gamma).and_then(|p| classify_swallowing(p, a, b)).map(|r| json!(r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_ends() {
        let v: Value = serde_json::from_str(&pressure_curve(0.5, 3)).unwrap();
        let p = v["p"].as_array().unwrap();
        assert!((p[0].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 2e-2);
        assert_eq!(p[2].as_f64().unwrap(), 0.0);
    }

    #[test]
    fn bad_input_is_reported() {
        let v: Value = serde_json::from_str(&classify(0.5, 0.8, 0.2)).unwrap();
        assert!(v["error"].is_string());
        let v: Value = serde_json::from_str(&escape_masses(0.5, 0.5, 3, "QQ", 5)).unwrap();
        assert!(v["error"].is_string());
    }

    #[test]
    fn escape_decays() {
        let v: Value = serde_json::from_str(&escape_masses(0.5, 0.5, 3, "RLR", 8)).unwrap();
        let m = v["mass"].as_array().unwrap();
        assert!(m.windows(2).all(|w| w[1].as_f64().unwrap() < w[0].as_f64().unwrap()));
    }
}
