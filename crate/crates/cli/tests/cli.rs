use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use deepscan::experts::stub::{ColorStubExperts, StubServer};
use deepscan::experts::ExpertBundle;

fn deepscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deepscan"))
        .args(args)
        .env_remove("DEEPSCAN_EXPERT_URL")
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, kind: &str, count: &str) {
    let out = deepscan(&[
        "synth", "generate", "--seed", "4", "--count", count, "--out", path(dir), "--kind", kind, "--size", "512",
        "--ratio", "0.002",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(deepscan(&[]).status.code(), Some(2));
    assert_eq!(deepscan(&["eval", "--bench", "x.jsonl", "--resume"]).status.code(), Some(2));
    assert_eq!(deepscan(&["eval", "--bench", "x.jsonl", "--k", "zero"]).status.code(), Some(2));
    assert_eq!(deepscan(&["--help"]).status.code(), Some(0));
    // A missing bench file is a runtime failure, not a usage error.
    assert_eq!(deepscan(&["eval", "--bench", "/nonexistent/bench.jsonl"]).status.code(), Some(1));
}

#[test]
fn eval_reports_match_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "spatial", "4");
    let bench = dir.path().join("bench.jsonl");
    let mut reports = Vec::new();
    for jobs in ["1", "8"] {
        let out_path = dir.path().join(format!("report{jobs}.json"));
        let out = deepscan(&[
            "eval", "--bench", path(&bench), "--mode", "cyclic", "--jobs", jobs, "--out", path(&out_path),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        reports.push(std::fs::read(&out_path).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: serde_json::Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(report["accuracy"], 1.0);
    assert_eq!(report["n"], 4);
}

#[test]
fn run_writes_the_trace_beside_the_image() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "attribute", "1");
    let spec: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("scene_0000.json")).unwrap()).unwrap();
    let image = dir.path().join("scene_0000.png");
    let overlay = dir.path().join("overlay.png");
    let mut args = vec![
        "run".to_string(),
        "--image".into(),
        path(&image).into(),
        "--question".into(),
        spec["question"]["text"].as_str().unwrap().into(),
        "--experts".into(),
        format!("oracle:{}", path(dir.path())),
        "--overlay".into(),
        path(&overlay).into(),
    ];
    for o in spec["question"]["options"].as_array().unwrap() {
        args.push("--option".into());
        args.push(o.as_str().unwrap().into());
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = deepscan(&refs);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("scene_0000.trace.json")).unwrap()).unwrap();
    assert_eq!(trace["answer_letter"], spec["question"]["answer"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), trace["answer"].as_str().unwrap());
    assert!(trace["grounding"].is_object());
    assert!(overlay.exists());
}

#[test]
fn serve_check_passes_against_the_stub() {
    let server = StubServer::spawn(ExpertBundle::from_shared(Arc::new(ColorStubExperts)), 8 << 20).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_deepscan"))
        .args(["serve-check", "--timeout-s", "30"])
        .env("DEEPSCAN_EXPERT_URL", server.url())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.lines().all(|l| l.starts_with("[PASS]")));

    let dead = deepscan(&["serve-check", "--url", "http://127.0.0.1:9", "--timeout-s", "2"]);
    assert_eq!(dead.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&dead.stdout).contains("[FAIL]"));
}
