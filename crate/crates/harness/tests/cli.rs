mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use finbias::manifest::RunManifest;

fn finbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finbias")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_accepts_the_fixture_and_prints_counts() {
    let o = finbias(&["validate", p(&common::fixtures().join("corpus"))]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("companies.jsonl     6") && out.contains("news.jsonl          2"), "{out}");
}

#[test]
fn validate_rejects_st_company() {
    let dir = tempfile::tempdir().unwrap();
    let staged = common::stage(dir.path());
    let companies = staged.join("corpus/companies.jsonl");
    let text = fs::read_to_string(&companies).unwrap().replacen("\"tier\":\"bottom\"}", "\"tier\":\"bottom\",\"st_flag\":true}", 1);
    fs::write(&companies, text).unwrap();
    let o = finbias(&["validate", p(&staged.join("corpus"))]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("st_flag"));
}

#[test]
fn validate_rejects_missing_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let staged = common::stage(dir.path());
    fs::remove_file(staged.join("corpus/manifest.json")).unwrap();
    assert_ne!(code(&finbias(&["validate", p(&staged.join("corpus"))])), 0);
}

#[test]
fn run_analyze_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let staged = common::stage(dir.path());
    let config = staged.join("run.toml");
    let run_dir = staged.join("out/run");

    let o = finbias(&["run", "--config", p(&config), "--limit", "30"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("84 cells planned, 30 attempted now"));
    let o = finbias(&["run", "--config", p(&config)]);
    assert!(stdout(&o).contains("54 attempted now, 54 backend calls"), "{}", stdout(&o));

    let o = finbias(&["analyze", p(&run_dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("all indicator families available"));
    let first = common::snapshot(&run_dir.join("report"));
    assert!(first.iter().any(|(f, _)| f == "tables/variance.csv"));

    let o = finbias(&["report", p(&run_dir), "--out", p(&dir.path().join("again"))]);
    assert_eq!(code(&o), 0);
    assert_eq!(common::snapshot(&dir.path().join("again")), first);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let staged = common::stage(dir.path());
    let out = dir.path().join("flagged");
    let o = finbias(&[
        "run", "--config", p(&staged.join("run.toml")), "--output", p(&out), "--seed", "7", "--repetitions", "2",
        "--max-parallel", "1",
    ]);
    assert_eq!(code(&o), 0);
    let m = RunManifest::read(&out).unwrap();
    assert_eq!((m.config.seed, m.config.repetitions, m.config.models[0].max_parallel), (Some(7), 2, 1));
}

#[test]
fn missing_seed_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let staged = common::stage(dir.path());
    let config = staged.join("run.toml");
    let text = fs::read_to_string(&config).unwrap().replace("seed = 42\n", "");
    fs::write(&config, text).unwrap();
    let o = finbias(&["run", "--config", p(&config)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn unreadable_config_exits_with_config_status() {
    assert_eq!(code(&finbias(&["run", "--config", "/nonexistent/run.toml"])), 3);
}

#[test]
fn failure_rate_above_threshold_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let staged = common::stage(dir.path());
    let config = staged.join("run.toml");
    // Top-level keys must precede the first table.
    let text = fs::read_to_string(&config)
        .unwrap()
        .replace("mock.toml", "mock_corrupted.toml")
        .replacen("seed = 42\n", "seed = 42\npartial_failure_threshold = 0.01\n", 1);
    fs::write(&config, text).unwrap();
    let o = finbias(&["run", "--config", p(&config)]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn report_before_analyze_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&finbias(&["report", p(dir.path())])), 3);
}

#[test]
fn cluster_requires_an_embedder() {
    let dir = tempfile::tempdir().unwrap();
    let staged = common::stage(dir.path());
    let config = staged.join("run.toml");
    let text = fs::read_to_string(&config).unwrap();
    let text = text.split("[embedder]").next().unwrap().to_string();
    fs::write(&config, text).unwrap();
    assert_eq!(code(&finbias(&["run", "--config", p(&config)])), 0);
    assert_eq!(code(&finbias(&["cluster", p(&staged.join("out/run"))])), 3);
}

#[test]
fn gen_scenarios_writes_verified_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scenarios.jsonl");
    let o = finbias(&["gen-scenarios", p(&common::fixtures().join("scenario_spec.jsonl")), "--out", p(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(&out).unwrap(), fs::read(common::fixtures().join("corpus/scenarios.jsonl")).unwrap());
}

#[test]
fn gen_scenarios_rejects_unordered_ladder() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.jsonl");
    fs::write(
        &spec,
        r#"{"id":"x","context":"sport","frame":"gain","mean":50,"mid_variance":900,"high_variance":100,"prompt":{"zh":"选择"}}"#,
    )
    .unwrap();
    let o = finbias(&["gen-scenarios", p(&spec)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(code(&finbias(&["frobnicate"])), 3);
    assert_eq!(code(&finbias(&["--help"])), 0);
}

#[test]
fn readme_config_example_loads() {
    let readme = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md")).unwrap();
    let block = readme.split("```toml\n").nth(1).unwrap().split("```").next().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(&path, block).unwrap();
    let cfg = finbias::config::RunConfig::load(&path).unwrap();
    assert_eq!(cfg.corpus, dir.path().join("corpus"));
    assert_eq!(cfg.risk_forms.len(), 3);
    assert_eq!(cfg.models[0].retry.retries, 2);
    assert_eq!(cfg.embedder.unwrap().dim, 32);
}
