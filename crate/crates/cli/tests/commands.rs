use std::path::Path;
use std::process::{Command, Output};

fn tripgrade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tripgrade"))
        .args(args)
        .env_remove("TRIPGRADE_EMBED_ENDPOINT")
        .output()
        .unwrap()
}

fn datagen(dir: &Path) {
    let out = tripgrade(&["datagen", "--seed", "4", "--count", "3", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn p(dir: &Path, rel: &str) -> String {
    dir.join(rel).display().to_string()
}

#[test]
fn datagen_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    datagen(a.path());
    datagen(b.path());
    for rel in ["queries.jsonl", "sandbox/flights.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap(), "{rel}");
    }
    assert_eq!(std::fs::read_dir(a.path().join("gold")).unwrap().count(), 9);
}

#[test]
fn evaluate_gold_plans_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path());
    let d = dir.path();
    let out = tripgrade(&[
        "evaluate", "--sandbox", &p(d, "sandbox"), "--queries", &p(d, "queries.jsonl"), "--plans", &p(d, "gold"),
        "--gold", &p(d, "gold"), "--jobs", "2", "--out", &p(d, "out"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("evaluated 9 plans, 9 delivered"), "{stdout}");
    let rates = std::fs::read_to_string(d.join("out/rates.csv")).unwrap();
    assert!(rates.lines().any(|l| l.starts_with("all,9,1.000000") && l.ends_with(",1.000000")), "{rates}");
    assert!(d.join("out/scores.csv").is_file());
}

#[test]
fn failing_plans_still_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path());
    let d = dir.path();
    let victim = std::fs::read_dir(d.join("gold")).unwrap().next().unwrap().unwrap().path();
    std::fs::write(&victim, "garbage").unwrap();
    let out = tripgrade(&[
        "evaluate", "--sandbox", &p(d, "sandbox"), "--queries", &p(d, "queries.jsonl"), "--plans", &p(d, "gold"),
        "--out", &p(d, "out"),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("8 delivered"));
}

#[test]
fn empty_plans_directory_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path());
    let d = dir.path();
    std::fs::create_dir(d.join("none")).unwrap();
    let out = tripgrade(&[
        "evaluate", "--sandbox", &p(d, "sandbox"), "--queries", &p(d, "queries.jsonl"), "--plans", &p(d, "none"),
        "--out", &p(d, "out"),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no plans found"));
}

#[test]
fn compare_same_run_is_tied() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path());
    let d = dir.path();
    let out = tripgrade(&[
        "compare", "--sandbox", &p(d, "sandbox"), "--queries", &p(d, "queries.jsonl"), "--plans", &p(d, "gold"),
        "--plans", &p(d, "gold"), "--out", &p(d, "cmp"),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("t_meal A / B"));
    assert!(!stdout.contains('*'), "{stdout}");
    assert!(d.join("cmp/comparison.json").is_file());
}

#[test]
fn compare_needs_two_plan_directories() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path());
    let d = dir.path();
    let out = tripgrade(&["compare", "--sandbox", &p(d, "sandbox"), "--queries", &p(d, "queries.jsonl"), "--plans", &p(d, "gold")]);
    assert!(!out.status.success());
}

#[test]
fn unreachable_embedding_service_is_an_error_without_fallback() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path());
    let d = dir.path();
    let base = [
        "evaluate", "--sandbox", &p(d, "sandbox"), "--queries", &p(d, "queries.jsonl"), "--plans", &p(d, "gold"),
        "--out", &p(d, "out"),
    ];
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_tripgrade"))
            .args(base)
            .args(extra)
            .env("TRIPGRADE_EMBED_ENDPOINT", "http://127.0.0.1:9/embed")
            .output()
            .unwrap()
    };
    let with_fallback = run(&["--embed-fallback"]);
    assert!(with_fallback.status.success(), "{}", String::from_utf8_lossy(&with_fallback.stderr));
    let scores = std::fs::read_to_string(d.join("out/scores.csv")).unwrap();
    assert!(scores.lines().skip(1).all(|l| !l.ends_with(",,")), "{scores}");
    let strict = run(&[]);
    assert_eq!(strict.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&strict.stderr).contains("embedding service unavailable"));
}

#[test]
fn missing_sandbox_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    datagen(dir.path());
    let d = dir.path();
    let out = tripgrade(&[
        "evaluate", "--sandbox", &p(d, "nope"), "--queries", &p(d, "queries.jsonl"), "--plans", &p(d, "gold"),
        "--out", &p(d, "out"),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
