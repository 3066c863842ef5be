//! Command-line surface tests: every subcommand exists, reads and writes its
//! documented formats, reports the documented exit codes, and reruns are
//! byte-identical for equal seeds.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gmdp"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn lift_min_delta_reads_problem_json() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("problem.json");
    std::fs::write(
        &problem,
        r#"{"delta": [0.5, 0.5], "theta": [0.7, 0.3], "relation": [[true, false], [false, true]]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["lift-min-delta", "--input"])
        .arg(&problem)
        .arg("--coupling-out")
        .arg(dir.path().join("coupling.json"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("delta = 0.2000"), "{stdout}");
    assert!(dir.path().join("coupling.json").exists());
}

#[test]
fn reduce_and_grid_dp_emit_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["reduce", "--order", "2", "--prefeedback-weight", "0.02", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let hankel = read(&dir.path().join("hankel.csv"));
    assert!(hankel.starts_with("#tool-version="));
    assert!(hankel.contains("index,hankel_value"));
    assert!(dir.path().join("reduced.json").exists());

    let out = bin()
        .args([
            "grid-dp",
            "--delta-cells",
            "0.2,1.5",
            "--horizon",
            "4",
            "--inputs",
            "5",
            "--safe",
            "-0.3,0.3",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read(&dir.path().join("grid_v0.csv")).contains("cell,value"));
    assert!(read(&dir.path().join("grid_policy.csv")).contains("t,cell,input_index"));
}

#[test]
fn tradeoff_emits_delta_epsilon_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "tradeoff",
            "--method",
            "normbound",
            "--delta-grid",
            "1e-1,1e-2",
            "--c1",
            "0.04",
            "--dof",
            "2",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("tradeoff.csv"));
    assert!(csv.contains("delta,epsilon"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn certify_exit_codes_distinguish_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    // the reference certificate point is sound
    let ok = bin()
        .args(["certify", "--samples", "20000", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));

    // an absurdly small ε is falsified → exit code 1
    let cert = dir.path().join("bad.json");
    let r = gmdp::casedata::office_reference();
    std::fs::write(
        &cert,
        serde_json::to_string(&gmdp::io::CertificateJson {
            m: gmdp::io::mat_to_rows(&r.m),
            p: gmdp::io::mat_to_rows(&r.p),
            r: vec![vec![r.r]],
            q: gmdp::io::mat_to_rows(&r.q),
            k: gmdp::io::mat_to_rows(&r.k),
            epsilon: 0.02,
            delta: 1e-2,
            c1: 0.04,
            dof: 2,
        })
        .unwrap(),
    )
    .unwrap();
    let bad = bin()
        .args(["certify", "--samples", "20000", "--certificate"])
        .arg(&cert)
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1), "{}", String::from_utf8_lossy(&bad.stdout));
}

#[test]
fn verify_runs_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["verify", "--instances", "30", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("sandwich_suite.csv"));
    assert!(csv.contains("index,exact,delta,gamma,tv_gap,pass"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("index")).count(), 30);
}

#[test]
fn refine_simulate_emits_per_trial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "refine-simulate",
            "--trials",
            "50",
            "--horizon",
            "60",
            "--recovery",
            "reset",
            "--out-dir",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("refine_trials.csv"));
    assert!(csv.contains("trial,safe,exits,first_exit"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("trial")).count(), 50);
}

#[test]
fn pipeline_reports_missing_config_with_exit_two() {
    let out = bin().args(["pipeline", "--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error"), "{err}");
}

#[test]
fn pipeline_missing_model_file_named_in_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"model": "/nope/missing_model.json", "seed": 1, "out_dir": "{}"}}"#,
            dir.path().join("out").display()
        ),
    )
    .unwrap();
    let out = bin().args(["pipeline", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing_model.json"));
}

#[test]
fn demo_two_zone_is_deterministic_and_pipeline_matches() {
    let run_dir = |dir: &Path| {
        let out = bin()
            .args(["demo", "two-zone", "--seed", "5", "--out-dir"])
            .arg(dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    run_dir(d1.path());
    run_dir(d2.path());
    for file in ["two_zone_tradeoff.csv", "two_zone_excursions.csv", "two_zone_report.json"] {
        assert_eq!(
            read(&d1.path().join(file)),
            read(&d2.path().join(file)),
            "{file} differs between reruns"
        );
    }

    // the pipeline route reproduces the demo byte-for-byte at equal seed
    let d3 = tempfile::tempdir().unwrap();
    let cfg = d3.path().join("cfg.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"model": "two-zone", "seed": 5, "out_dir": "{}"}}"#,
            d3.path().join("out").display()
        ),
    )
    .unwrap();
    let out = bin().args(["pipeline", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["two_zone_tradeoff.csv", "two_zone_excursions.csv"] {
        assert_eq!(
            read(&d1.path().join(file)),
            read(&d3.path().join("out").join(file)),
            "pipeline output differs from demo for {file}"
        );
    }
}
