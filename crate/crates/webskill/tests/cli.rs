//! CLI behavior: exit codes, diagnostics, artifact layout, reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_webskill")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

fn sha(path: &Path) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(std::fs::read(path).unwrap()))
}

#[test]
fn run_writes_the_artifact_set_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = dir.path().join("c.toml");
    write(
        &config,
        &format!(
            "[family]\ncategory = \"shopping\"\nn_sites = 2\nseed = 3\n\n\
             [tasks]\ncount = 6\nholdout = 4\n\n\
             [run]\nout_dir = \"{}\"\n",
            out.display()
        ),
    );
    let output = run(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0));
    for artifact in [
        "site_specs.json",
        "tasks.json",
        "holdout_tasks.json",
        "plans.json",
        "trajectories.jsonl",
        "eval_trajectories.jsonl",
        "audit.jsonl",
        "metrics.csv",
        "metrics.json",
        "meta.json",
        "library/creation.log",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }
}

#[test]
fn missing_suite_file_exits_2_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    write(
        &config,
        "[family]\ncategory = \"shopping\"\nn_sites = 1\nseed = 0\n\n\
         [tasks]\nsuite_path = \"/definitely/not/here.json\"\n",
    );
    let output = run(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(
        String::from_utf8_lossy(&output.stderr).contains("/definitely/not/here.json"),
        "diagnostic must name the path: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn rerun_with_same_seed_reproduces_metrics_csv_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    write(
        &config,
        "[family]\ncategory = \"coding\"\nn_sites = 2\nseed = 11\n\n\
         [tasks]\ncount = 8\nholdout = 4\n",
    );
    for out in [&out1, &out2] {
        let output = run(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0));
    }
    assert_eq!(sha(&out1.join("metrics.csv")), sha(&out2.join("metrics.csv")));
}

#[test]
fn explore_site_counts_sum_to_iterations_and_audit_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    write(
        &config,
        "mode = \"task-free\"\n\n\
         [family]\ncategory = \"shopping\"\nn_sites = 3\nseed = 21\n\n\
         [tasks]\nholdout = 3\n\n\
         [explore]\niterations = 9\n",
    );
    let out1 = dir.path().join("x1");
    let out2 = dir.path().join("x2");
    for out in [&out1, &out2] {
        let output = run(&[
            "explore",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    }
    // Per-site iteration counts sum to the budget.
    let audit = std::fs::read_to_string(out1.join("audit.jsonl")).unwrap();
    let counts_line = audit
        .lines()
        .find(|l| l.contains("site_iterations"))
        .expect("site iteration record");
    let v: serde_json::Value = serde_json::from_str(counts_line).unwrap();
    let total: u64 = v["counts"]
        .as_object()
        .unwrap()
        .values()
        .map(|c| c.as_u64().unwrap())
        .sum();
    assert_eq!(total, 9);
    // Reproducible audit trail.
    assert_eq!(sha(&out1.join("audit.jsonl")), sha(&out2.join("audit.jsonl")));
}

#[test]
fn continual_single_phase_emits_a_one_row_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    let out = dir.path().join("out");
    write(
        &config,
        &format!(
            "[family]\ncategory = \"shopping\"\nn_sites = 1\nseed = 5\n\n\
             [tasks]\nholdout = 3\n\n\
             [run]\nout_dir = \"{}\"\n\n\
             [[continual.phases]]\nsite = \"shopping0\"\niterations = 4\n",
            out.display()
        ),
    );
    let output = run(&["continual", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(0), "{}", String::from_utf8_lossy(&output.stderr));
    let csv = std::fs::read_to_string(out.join("forgetting.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2); // header + one phase row
    assert!(rows[0].starts_with("phase,phase_site,h0_shopping0_sr"));
}

#[test]
fn continual_unknown_site_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    write(
        &config,
        "[family]\ncategory = \"shopping\"\nn_sites = 1\nseed = 5\n\n\
         [[continual.phases]]\nsite = \"nowhere9\"\niterations = 4\n",
    );
    let output = run(&["continual", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("nowhere9"));
}

#[test]
fn metrics_matches_the_library_code_path_and_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    let out = dir.path().join("out");
    write(
        &config,
        &format!(
            "[family]\ncategory = \"shopping\"\nn_sites = 2\nseed = 3\n\n\
             [tasks]\ncount = 6\nholdout = 4\n\n\
             [run]\nout_dir = \"{}\"\n",
            out.display()
        ),
    );
    assert_eq!(run(&["run", "--config", config.to_str().unwrap()]).status.code(), Some(0));

    // Same data through the CLI equals the in-process computation.
    let log = out.join("eval_trajectories.jsonl");
    let output = run(&[
        "metrics",
        "--log",
        log.to_str().unwrap(),
        "--library",
        out.join("library").to_str().unwrap(),
        "--gamma",
        "0.01",
    ]);
    assert_eq!(output.status.code(), Some(0));
    let printed: serde_json::Value =
        serde_json::from_slice(&output.stdout).expect("report JSON on stdout");
    let trajs = webskill::harness::artifacts::read_trajectories(&log).unwrap();
    let lib = webskill::skill_model::store::load_library(&out.join("library")).unwrap();
    let batch = webskill::metrics::EvaluationBatch::over_trajectories(&trajs, &lib, 0.01);
    let expected = webskill::metrics::report(&batch).unwrap();
    assert_eq!(
        printed["report"]["success_rate"].as_f64().unwrap(),
        expected.success_rate
    );
    assert_eq!(
        printed["report"]["adoption_rate"].as_f64().unwrap(),
        expected.adoption_rate
    );

    // Empty log set: a runtime error, not a crash.
    let empty = dir.path().join("empty.jsonl");
    write(&empty, "");
    let output = run(&[
        "metrics",
        "--log",
        empty.to_str().unwrap(),
        "--library",
        out.join("library").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("no trajectories"));

    // Mixed schema versions: explicit mismatch diagnostic.
    let bad = dir.path().join("bad.jsonl");
    let mut text = std::fs::read_to_string(&log).unwrap();
    text.push_str("{\"schema\":\"trajectory/2\",\"kind\":\"end\",\"traj\":\"z\",\"task\":\"z\",\"site\":\"s\",\"success\":true,\"terminal\":\"d\",\"wall_steps\":1}\n");
    write(&bad, &text);
    let output = run(&[
        "metrics",
        "--log",
        bad.to_str().unwrap(),
        "--library",
        out.join("library").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("schema mismatch"));
}

#[test]
fn mode_tag_mismatch_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    write(
        &config,
        "mode = \"task-free\"\n\n[family]\ncategory = \"shopping\"\nn_sites = 1\nseed = 0\n",
    );
    let output = run(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}
