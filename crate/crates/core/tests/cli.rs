use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contact-decay"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout));
    })
}

#[test]
fn survive_csv_schema_and_reproducibility() {
    let args = ["survive", "--lambda", "0", "--reps", "4000", "--t-grid", "0:2:0.5"];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "t,n,k,p_hat,ci_lo,ci_hi");
    assert_eq!(body.len(), 6);
    let first: Vec<&str> = body[1].split(',').collect();
    assert_eq!(first[1], "4000");
    assert_eq!(first[3].parse::<f64>().unwrap(), 1.0);
    assert!(text.lines().any(|l| l.starts_with("# config: ") && l.contains("\"version\"")));
    let b = bin().args(args).arg("--threads").arg("1").output().unwrap();
    assert_eq!(a.stdout, b.stdout, "output must not depend on the worker count");
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["survive", "--reps", "0"][..],
        &["survive", "--t-grid", "0:1"][..],
        &["survive", "--model", "voter"][..],
        &["theorem22", "--dims", ""][..],
        &["bounds", "--provider", "oracle"][..],
        &["verify", "--suite", "nope"][..],
        &["frobnicate"][..],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bounds_records() {
    let out = run(&["bounds", "--d", "1", "--lambda", "0.2"]);
    assert_eq!(out.status.code(), Some(0));
    let b = &json(&out)["bounds"];
    assert!((b["lower"].as_f64().unwrap() + 0.743033971150864712).abs() < 1e-5);
    assert!((b["upper"].as_f64().unwrap() + 0.6).abs() < 1e-15);
    for k in ["p_star", "mu", "r_e1", "r_error"] {
        assert!(b[k].is_number(), "{k}");
    }

    let b = json(&run(&["bounds", "--lambda", "0", "--d", "2"]));
    assert_eq!(b["bounds"]["lower"].as_f64(), Some(-1.0));
    assert_eq!(b["bounds"]["upper"].as_f64(), Some(-1.0));

    let b = json(&run(&["bounds", "--d", "2", "--lambda", "0.4"]));
    assert!(b["bounds"]["lower"].is_null());
    assert!(b["bounds"]["warning"].is_string());
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nmodel = classic\nd = 2\nlambda = 0.05\nreps = 500\nt_grid = 0:3:1\n").unwrap();
    let out_path = dir.path().join("curve.json");
    let out = run(&[
        "survive",
        "--config",
        cfg.to_str().unwrap(),
        "--reps",
        "300",
        "--format",
        "json",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(v["curve"]["replicates"].as_u64(), Some(300));
    assert_eq!(v["config"]["args"]["survive"]["model"], "classic");
    let p: Vec<f64> = v["curve"]["p_hat"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(p[0], 1.0);
    assert!(p.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn verify_filter_and_negative_control() {
    let out = run(&["verify", "--suite", "coupling", "--d", "2", "--L", "8", "--t-max", "5", "--lambda", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let suites = v["report"]["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 1);
    assert_eq!(suites[0]["details"]["sample_mismatches"].as_u64(), Some(0));

    let out = run(&["verify", "--suite", "eigencheck", "--perturb-p", "0.05"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["report"]["passed"], false);
}

#[test]
fn threads_from_environment() {
    let bad = bin().env("CONTACT_DECAY_THREADS", "zero").args(["survive", "--reps", "10"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let ok = bin().env("CONTACT_DECAY_THREADS", "2").args(["survive", "--reps", "10"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
