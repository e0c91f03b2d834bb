use std::path::PathBuf;
use std::process::{Command, Output};

fn qal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qal"))
        .args(args)
        .output()
        .expect("run qal")
}

fn instances() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../instances")
}

fn demo2() -> String {
    instances().join("demo2.json").display().to_string()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn estimate_prints_json() {
    for engine in ["analytic", "statevector"] {
        let out = qal(&[
            "estimate",
            "--instance",
            &demo2(),
            "--hypothesis",
            "identity",
            "--epsilon",
            "0.05",
            "--delta",
            "0.1",
            "--seed",
            "3",
            "--engine",
            engine,
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let v = json(&out);
        assert_eq!(v["hypothesis"], "identity");
        assert_eq!(v["m"], 7);
        assert!((v["mu_hat"].as_f64().unwrap() - 0.3).abs() <= 0.05);
    }
}

#[test]
fn learn_both_methods() {
    for method in ["quantum", "classical"] {
        let out = qal(&[
            "learn",
            "--instance",
            &demo2(),
            "--epsilon",
            "0.05",
            "--delta",
            "0.1",
            "--seed",
            "1",
            "--method",
            method,
        ]);
        assert!(out.status.success());
        assert_eq!(json(&out)["chosen_id"], "identity");
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    let unknown = qal(&[
        "estimate",
        "--instance",
        &demo2(),
        "--hypothesis",
        "nope",
        "--epsilon",
        "0.05",
        "--delta",
        "0.1",
    ]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("nope"));

    let capped = qal(&[
        "estimate",
        "--instance",
        &demo2(),
        "--hypothesis",
        "flip",
        "--epsilon",
        "0.05",
        "--delta",
        "0.1",
        "--qubit-cap",
        "6",
    ]);
    assert_eq!(capped.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("capacity exceeded"));

    assert_eq!(
        qal(&["learn", "--instance", &demo2()]).status.code(),
        Some(2)
    );
    let missing = qal(&[
        "learn",
        "--instance",
        "/nonexistent.json",
        "--epsilon",
        "0.1",
        "--delta",
        "0.1",
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn bench_writes_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = instances().join("bench_demo2.json").display().to_string();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = qal(&[
            "bench",
            "--config",
            &config,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stderr).contains("slope"));
        std::fs::read_to_string(path).unwrap()
    };
    let first = run("a.csv");
    assert_eq!(first, run("b.csv"));
    let mut lines = first.lines();
    assert_eq!(
        lines.next().unwrap(),
        "instance_id,method,epsilon,delta,trial,seed,chosen_id,samples_used,risk_gap,success,reason"
    );
    assert_eq!(lines.count(), 2 * 4 * 20);
}

#[test]
fn verify_exit_codes() {
    let ok = qal(&["verify", "--quick"]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stdout)
    );
    assert!(String::from_utf8_lossy(&ok.stdout).contains("[PASS]"));

    let faulty = qal(&["verify", "--quick", "--inject-fault", "flip-v"]);
    assert_eq!(faulty.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&faulty.stdout).contains("[FAIL]"));

    let capped = qal(&["verify", "--quick", "--qubit-cap", "4"]);
    assert_eq!(capped.status.code(), Some(1));
}
