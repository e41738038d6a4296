use std::fs;
use std::process::{Command, Output};

const HOLE: &str = r#"{"type":"markov","N0":3,"cells":["RLR"]}"#;
// small enough that each run takes a fraction of a second
const FAST: &[&str] = &["--n-max", "300", "--order", "3", "--max-order", "3", "--m", "64", "--l-max", "100"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpholes")).args(args).output().expect("binary runs")
}

fn run_fast(args: &[&str]) -> Output {
    let mut all = args.to_vec();
    all.extend_from_slice(FAST);
    run(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn validation_errors_exit_1() {
    for args in [
        vec!["pressure", "--gamma", "1.5", "--t", "0.5"],
        vec!["pressure", "--t", "0.5", "--no-such-flag"],
        vec!["pressure", "--t", "-0.2"],
        vec!["escape", "--t", "0.5"],
        vec!["pressure", "--t", "0.5", "--hole", r#"{"type":"markov","N0":3,"cells":["RXR"]}"#],
        vec!["pressure", "--t", "0.5", "--hole", r#"{"type":"markov","N0":1,"cells":["R"]}"#],
        vec!["frobnicate"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty(), "{args:?} printed no diagnostic");
    }
}

#[test]
fn exhausted_word_budget_exits_2() {
    let o = run(&["pressure", "--t", "0.5", "--word-budget", "5"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("word budget"));
}

#[test]
fn pressure_output_embeds_metadata() {
    let o = run_fast(&["pressure", "--t", "0.5", "--hole", HOLE, "--seed", "11"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tool"], "mpholes");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["seed"], 11);
    assert_eq!(v["config"]["t"], 0.5);
    let p = v["result"]["p"]["value"].as_f64().unwrap();
    let ph = v["result"]["pH"]["value"].as_f64().unwrap();
    assert!(p > 0.3 && p < 0.4, "p(0.5) = {p}");
    assert!(ph < p, "hole must lower the pressure: {ph} vs {p}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        vec!["pressure", "--t", "0.4", "--hole", HOLE],
        vec!["escape", "--t", "0.5", "--hole", HOLE, "--depth", "8"],
        vec!["classify", "--hole", r#"{"type":"interval","z":0.7,"epsilons":[0.05,0.02]}"#],
    ] {
        let a = run_fast(&args);
        let b = run_fast(&args);
        assert_eq!(code(&a), 0, "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, format!(r#"{{"t": 0.3, "seed": 5, "depth": 6, "hole": {}}}"#, serde_json::to_string(HOLE).unwrap())).unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = run_fast(&["--config", cfg, "escape"]);
    assert_eq!(code(&from_file), 0, "{}", String::from_utf8_lossy(&from_file.stderr));
    let text = stdout(&from_file);
    assert!(text.contains("\"t\":0.3"), "{text}");
    assert!(text.contains("# seed: 5"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 6);

    let overridden = run_fast(&["--config", cfg, "escape", "--t", "0.5"]);
    assert!(stdout(&overridden).contains("\"t\":0.5"));

    fs::write(dir.path().join("bad.json"), r#"{"t": 0.3, "colour": 1}"#).unwrap();
    let bad = run(&["--config", dir.path().join("bad.json").to_str().unwrap(), "pressure"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn out_dir_receives_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run_fast(&["escape", "--t", "0.5", "--hole", HOLE, "--depth", "5", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(files.len(), 1);
    let text = fs::read_to_string(&files[0]).unwrap();
    assert!(text.contains("n,mass,lo,hi,cylinders"));
}

#[test]
fn sweep_writes_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("fam.json");
    fs::write(&fam, r#"{"type":"markov-family","members":[{"N0":3,"cells":["RLR"]}]}"#).unwrap();
    let o = run_fast(&["sweep", "--t-grid", "0.5", "--holes", fam.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("gamma,t,epsilon,pH,P_te,log_Lambda,free_energy,kac,err_psi_1"), "{header}");
    let row: Vec<f64> = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row[1], 0.5);
    // t = 0.5 lies below the threshold of this hole, so the free energy is positive
    assert!(row[6] > 0.0);
}
