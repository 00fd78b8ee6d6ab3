use std::fs;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hedonic-p2p")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn generate_run_verify_tamper() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scen = d.join("s.txt");
    ok(&["generate", "--seed", "7", "--mix", "0.1/0.8/0.1", "--out", scen.to_str().unwrap()]);

    let run_dir = d.join("run");
    let args = [
        "run",
        "--scenario-file",
        scen.to_str().unwrap(),
        "--iterations",
        "30",
        "--pop-size",
        "10",
        "--out",
        run_dir.to_str().unwrap(),
    ];
    let stdout = ok(&args);
    assert!(stdout.contains("total traded:"));
    for f in ["scenario.txt", "metrics.csv", "audit.csv", "transactions.txt", "ledger.bin", "trace_h10.csv"] {
        assert!(run_dir.join(f).exists(), "missing {f}");
    }
    assert_eq!(fs::read_to_string(run_dir.join("scenario.txt")).unwrap(), fs::read_to_string(&scen).unwrap());
    let metrics = fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);

    // Same inputs give byte-identical outputs.
    let again = d.join("again");
    let mut args2 = args;
    args2[8] = again.to_str().unwrap();
    ok(&args2);
    for f in ["metrics.csv", "transactions.txt", "ledger.bin"] {
        assert_eq!(fs::read(run_dir.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }

    let ledger = run_dir.join("ledger.bin");
    assert!(ok(&["verify-ledger", ledger.to_str().unwrap()]).starts_with("PASS 13 blocks"));
    let mut bytes = fs::read(&ledger).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    fs::write(&ledger, bytes).unwrap();
    let out = bin(&["verify-ledger", ledger.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL at block"));
}

#[test]
fn baseline_and_sweeps_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let base = d.join("base");
    ok(&["baseline", "--preset", "community48", "--seed", "3", "--out", base.to_str().unwrap()]);
    assert!(base.join("metrics.csv").exists());

    let sweep = d.join("gamma");
    let stdout = ok(&[
        "sweep-gamma",
        "--gammas",
        "14.75,10",
        "--replications",
        "2",
        "--iterations",
        "10",
        "--pop-size",
        "6",
        "--out",
        sweep.to_str().unwrap(),
    ]);
    assert!(stdout.contains("gamma=10.000 vs gamma=14.750"));
    let summary = fs::read_to_string(sweep.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let rows = fs::read_to_string(sweep.join("rows.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 3);

    let weights = d.join("w");
    ok(&["sweep-weights", "--replications", "2", "--iterations", "5", "--out", weights.to_str().unwrap()]);
    let rel = d.join("r");
    ok(&["sweep-relations", "--replications", "1", "--iterations", "5", "--out", rel.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(rel.join("summary.csv")).unwrap().lines().count(), 4);
}

#[test]
fn bad_input_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scen = dir.path().join("bad.txt");
    fs::write(&scen, "not a scenario\n").unwrap();
    let out = bin(&["run", "--scenario-file", scen.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!bin(&["run", "--weights", "lopsided", "--out", "x"]).status.success());
    assert!(!bin(&["generate", "--mix", "0.5/0.5/0.5", "--out", "x"]).status.success());
}
