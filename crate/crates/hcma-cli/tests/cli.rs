//! End-to-end checks of the binary: exit codes, artifact layout, JSON error
//! lines, and bitwise repeatability.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hcma"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    let text = fs::read_to_string(dir.join("report.json")).expect("report.json exists");
    assert_eq!(text.matches('\n').count(), 1, "single-line JSON");
    serde_json::from_str(&text).expect("report parses")
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.trim();
    assert!(!line.contains('\n'), "single-line error, got: {text}");
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is JSON, got: {text}"))
}

#[test]
fn solve_flat_endpoints_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let result = run(
        &[
            "solve",
            "--phi0", "zero",
            "--phi1", "zero",
            "--epsilon", "0.1",
            "--grid", "16",
            "--nt", "9",
            "--out", out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));

    let json = report(&out);
    assert_eq!(json["command"], "solve");
    assert_eq!(json["config"]["epsilon"], 0.1);
    assert_eq!(json["constants"]["b"], 0.0);
    assert_eq!(json["constants"]["r"], 0.0);
    assert!(json["result"]["residual_norm"].as_f64().unwrap() <= 1e-9);
    let sup_h = json["result"]["sup_h"].as_f64().unwrap();
    assert!((sup_h - 1.0).abs() < 1e-9, "flat family keeps n + Δφ = n, got {sup_h}");

    let levels = fs::read_to_string(out.join("levels.csv")).unwrap();
    assert!(levels.starts_with("t,sup_h,min_eig,E,residual\n"));
    assert_eq!(levels.lines().count(), 1 + 9);
    for name in ["residual.dat", "energy.dat", "checkpoint.bin"] {
        assert!(out.join(name).exists(), "{name} written");
    }
    let first = fs::read_to_string(out.join("residual.dat")).unwrap();
    assert!(first.starts_with('#'));
}

#[test]
fn config_errors_exit_2_with_machine_readable_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let result = run(
        &[
            "solve",
            "--grid", "4",
            "--out", dir.path().join("x").to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(result.status.code(), Some(2));
    let err = stderr_json(&result);
    assert_eq!(err["code"], "config");
    assert!(err["message"].as_str().unwrap().contains("8"));

    let result = run(&["solve", "--set", "gridd=16"], &[]);
    assert_eq!(result.status.code(), Some(2));
    assert_eq!(stderr_json(&result)["code"], "config");
}

#[test]
fn starved_solver_exits_3_and_sweep_still_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let result = run(
        &[
            "sweep",
            "--phi0", "zero",
            "--phi1", "cos:0.5:1,0",
            "--grid", "16",
            "--nt", "9",
            "--schedule", "0.1,0.01",
            "--set", "max_newton=1",
            "--out", out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(result.status.code(), Some(3));
    assert_eq!(stderr_json(&result)["code"], "solver");

    let json = report(&out);
    let truncated = &json["result"]["sweep"]["truncated"];
    assert!(!truncated.is_null(), "truncation recorded");
    assert_eq!(truncated["stage"], 0);
    assert!(out.join("sweep.csv").exists());
}

#[test]
fn oracle_suites_pass_and_report_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let result = run(
        &[
            "oracle",
            "--n", "2",
            "--samples", "2000",
            "--curvature-b", "1",
            "--out", out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let json = report(&out);
    let suites = json["result"]["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 7);
    assert!(suites.iter().all(|s| s["passed"].as_bool().unwrap()));
    assert!(json["result"]["expansion"]["order"].as_f64().unwrap() > 1.9);
    let csv = fs::read_to_string(out.join("suites.csv")).unwrap();
    assert!(csv.starts_with("id,samples,worst_rel_slack,worst_sample,failures,passed\n"));
    assert_eq!(csv.lines().count(), 1 + 7);
}

#[test]
fn verify_recomputes_checks_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let solve_out = dir.path().join("solve");
    let result = run(
        &[
            "solve",
            "--phi0", "zero",
            "--phi1", "cos:0.3:1,0",
            "--epsilon", "0.1",
            "--grid", "16",
            "--nt", "9",
            "--f", "cos:0.1:1,0",
            "--out", solve_out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));

    let verify_out = dir.path().join("verify");
    let ckpt = solve_out.join("checkpoint.bin");
    let result = run(
        &[
            "verify",
            "--checkpoint", ckpt.to_str().unwrap(),
            "--out", verify_out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let json = report(&verify_out);
    // The density comes back from the checkpoint metadata, not the default.
    assert_eq!(json["config"]["f"], "cos:0.1:1,0");
    assert!(json["result"]["passed"].as_bool().unwrap());
    let fd = json["result"]["fd"].as_array().unwrap();
    assert_eq!(fd.len(), 4);
    let first = fd[0]["sup_error"].as_f64().unwrap();
    let last = fd[3]["sup_error"].as_f64().unwrap();
    assert!(last < first, "linearization error shrinks with the step");
    assert!(verify_out.join("fd.dat").exists());

    // A stale-format checkpoint is rejected as a config problem.
    let mut bytes = fs::read(&ckpt).unwrap();
    bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
    fs::write(&ckpt, &bytes).unwrap();
    let result = run(
        &[
            "verify",
            "--checkpoint", ckpt.to_str().unwrap(),
            "--out", verify_out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(result.status.code(), Some(2));
    let err = stderr_json(&result);
    assert_eq!(err["code"], "config");
    assert!(err["message"].as_str().unwrap().contains("version"));
}

#[test]
fn distance_between_constants_matches_their_gap() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let result = run(
        &[
            "distance",
            "--phi0", "zero",
            "--phi1", "const:0.3",
            "--grid", "8",
            "--nt", "9",
            "--schedule", "0.1,0.01",
            "--out", out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let json = report(&out);
    let d = json["result"]["distance"]["distance"].as_f64().unwrap();
    assert_eq!(json["result"]["distance"]["epsilon"].as_f64().unwrap(), 0.01);
    assert!((d - 0.3).abs() <= 0.02, "affine family, got {d}");
}

#[test]
fn triangle_on_constants_is_nearly_additive() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let result = run(
        &[
            "triangle",
            "--phi0", "zero",
            "--phi1", "const:0.3",
            "--phi2", "const:0.7",
            "--grid", "8",
            "--nt", "9",
            "--schedule", "0.1,0.01",
            "--out", out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let json = report(&out);
    let defect = json["result"]["defect"].as_f64().unwrap();
    assert!(defect.abs() <= 1e-4, "constant legs are additive, defect {defect}");
    let legs = fs::read_to_string(out.join("legs.csv")).unwrap();
    assert!(legs.starts_with("from,to,epsilon,distance,truncated\n"));
    assert_eq!(legs.lines().count(), 1 + 3);
}

#[test]
fn reports_are_bitwise_repeatable_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let args = [
        "sweep",
        "--phi0", "zero",
        "--phi1", "cos:0.3:1,0",
        "--grid", "16",
        "--nt", "9",
        "--schedule", "0.1,0.0316",
        "--seed", "42",
        "--out", out.to_str().unwrap(),
    ];
    let result = run(&args, &[("HCMA_THREADS", "1")]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let first = fs::read(out.join("report.json")).unwrap();
    let first_ckpt = fs::read(out.join("checkpoint.bin")).unwrap();

    let result = run(&args, &[("HCMA_THREADS", "4")]);
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let second = fs::read(out.join("report.json")).unwrap();
    let second_ckpt = fs::read(out.join("checkpoint.bin")).unwrap();

    assert_eq!(first, second, "identical config and seed give identical bytes");
    assert_eq!(first_ckpt, second_ckpt);
}

#[test]
fn checkpoint_levels_serve_as_endpoints() {
    let dir = tempfile::tempdir().unwrap();
    let solve_out = dir.path().join("solve");
    let result = run(
        &[
            "solve",
            "--phi0", "zero",
            "--phi1", "const:0.2",
            "--epsilon", "0.1",
            "--grid", "8",
            "--nt", "9",
            "--out", solve_out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(result.status.success());

    // Boundary level 8 of the stored path is the const:0.2 endpoint.
    let ckpt = format!("ckpt:{}:8", solve_out.join("checkpoint.bin").display());
    let second_out = dir.path().join("second");
    let result = run(
        &[
            "solve",
            "--phi0", "zero",
            "--phi1", &ckpt,
            "--epsilon", "0.1",
            "--grid", "8",
            "--nt", "9",
            "--out", second_out.to_str().unwrap(),
        ],
        &[],
    );
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let json = report(&second_out);
    assert!(json["result"]["residual_norm"].as_f64().unwrap() <= 1e-9);

    // A level past the end is a config error.
    let bad = format!("ckpt:{}:9", solve_out.join("checkpoint.bin").display());
    let result = run(
        &[
            "solve",
            "--phi0", "zero",
            "--phi1", &bad,
            "--grid", "8",
            "--nt", "9",
            "--out", second_out.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(result.status.code(), Some(2));
}
