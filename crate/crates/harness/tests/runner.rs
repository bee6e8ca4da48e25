mod common;

use std::collections::BTreeMap;
use std::path::Path;

use finbias::config::{ConfigError, ModelConfig, RunConfig};
use finbias::manifest::{manifest_digest, RunManifest};
use finbias::mock::{FaultScript, MockScript};
use finbias::runner::{cmd_run, read_cells, CellOutcome, CellRecord, RunError, RunOptions};
use finbias_core::ScoreScale;
use proptest::prelude::*;

fn belief_only(dir: &Path) -> RunConfig {
    let staged = common::stage(dir);
    let mut cfg = common::mock_config(dir, &staged.join("corpus"), &staged.join("mock.toml"), 2);
    cfg.probes.risk = false;
    cfg
}

fn outcomes(cells: &BTreeMap<String, CellRecord>) -> Vec<(String, CellOutcome)> {
    cells.values().map(|r| (r.cell.clone(), r.outcome.clone())).collect()
}

#[test]
fn two_news_six_companies_two_forms_make_24_parsed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = belief_only(dir.path());
    let s = cmd_run(&cfg, &RunOptions::default()).unwrap();
    assert_eq!((s.planned, s.attempted_now, s.backend_calls), (24, 24, 24));
    assert_eq!((s.stats.attempted, s.stats.parsed, s.stats.failed), (24, 24, 0));
    assert_eq!(read_cells(&cfg.output_dir).unwrap().len(), 24);
}

#[test]
fn risk_cells_cover_scenarios_repetitions_forms_and_languages() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = belief_only(dir.path());
    cfg.probes.risk = true;
    cfg.probes.news = false;
    let s = cmd_run(&cfg, &RunOptions::default()).unwrap();
    // 2 scenarios × 5 repetitions × 3 forms × 2 languages
    assert_eq!(s.planned, 60);
    assert_eq!(s.stats.parsed, 60);
}

#[test]
fn interrupted_run_resumes_only_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = belief_only(dir.path());
    let first = cmd_run(&cfg, &RunOptions { limit: Some(10) }).unwrap();
    assert_eq!((first.attempted_now, first.backend_calls, first.stats.attempted), (10, 10, 10));
    let second = cmd_run(&cfg, &RunOptions::default()).unwrap();
    assert_eq!((second.attempted_now, second.backend_calls, second.stats.attempted), (14, 14, 24));
    let third = cmd_run(&cfg, &RunOptions::default()).unwrap();
    assert_eq!((third.attempted_now, third.backend_calls), (0, 0));

    let other = tempfile::tempdir().unwrap();
    let straight = belief_only(other.path());
    cmd_run(&straight, &RunOptions::default()).unwrap();
    assert_eq!(outcomes(&read_cells(&cfg.output_dir).unwrap()), outcomes(&read_cells(&straight.output_dir).unwrap()));
}

#[test]
fn transient_failures_are_retried_on_resume() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = belief_only(dir.path());
    let flaky = MockScript {
        faults: FaultScript { fail_substrings: vec!["回购".into()], ..Default::default() },
        ..common::fixture_script()
    };
    cfg.models[0].script = Some(common::write_script(dir.path(), "flaky.toml", &flaky));
    let first = cmd_run(&cfg, &RunOptions::default()).unwrap();
    assert_eq!((first.stats.gateway_errors, first.stats.parsed), (12, 12));
    assert!(first.exceeds_threshold(cfg.partial_failure_threshold));
    cfg.models[0].script = Some(dir.path().join("fixtures/mock.toml"));
    let second = cmd_run(&cfg, &RunOptions::default()).unwrap();
    assert_eq!((second.attempted_now, second.stats.parsed, second.stats.failed), (12, 24, 0));
}

#[test]
fn live_endpoint_without_credentials_fails_at_startup() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = belief_only(dir.path());
    let mut live = ModelConfig::mock("live-a", "unused");
    live.endpoint = "http://127.0.0.1:1".into();
    live.script = None;
    live.api_key_env = Some("FINBIAS_TEST_KEY_THAT_IS_NEVER_SET".into());
    cfg.models.push(live);
    match cmd_run(&cfg, &RunOptions::default()) {
        Err(RunError::Config(ConfigError::MissingCredential { model, .. })) => assert_eq!(model, "live-a"),
        other => panic!("expected credential error, got {other:?}"),
    }
    assert!(!cfg.output_dir.exists());
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = belief_only(dir.path());
    cfg.seed = None;
    assert!(matches!(cmd_run(&cfg, &RunOptions::default()), Err(RunError::Config(ConfigError::Invalid(_)))));
}

#[test]
fn corrupted_replies_keep_cell_accounting_closed() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = belief_only(dir.path());
    cfg.probes.risk = true;
    cfg.models[0].script = Some(dir.path().join("fixtures/mock_corrupted.toml"));
    let s = cmd_run(&cfg, &RunOptions::default()).unwrap();
    let st = s.stats;
    assert!(st.is_consistent(), "{st:?}");
    assert_eq!(st.attempted, 84);
    assert_eq!(st.parse.parsed + st.parse.unparseable + st.parse.out_of_range + st.parse.no_label + st.parse.conflicting, st.parse.total);
    assert!(st.parse.unparseable > 0);
    let failures = std::fs::read_to_string(cfg.output_dir.join("parse_failures.log")).unwrap();
    assert_eq!(failures.lines().count(), st.failed);
}

#[test]
fn manifest_records_config_and_completion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = belief_only(dir.path());
    cmd_run(&cfg, &RunOptions::default()).unwrap();
    let m = RunManifest::read(&cfg.output_dir).unwrap();
    assert_eq!(m.corpus_version, "fixture-1");
    assert_eq!(m.config, cfg);
    assert_eq!(m.completion.unwrap().attempted, 24);
    assert!(m.finished_at.unwrap() >= m.started_at);
}

#[test]
fn digest_tracks_outputs_not_locations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = belief_only(dir.path());
    let base = manifest_digest(&cfg, "v").unwrap();
    let mut moved = cfg.clone();
    moved.output_dir = dir.path().join("elsewhere");
    moved.cache_dir = dir.path().join("other-cache");
    assert_eq!(manifest_digest(&moved, "v").unwrap(), base);
    let mut rescaled = cfg.clone();
    rescaled.scale = ScoreScale { min: -5, max: 5 };
    assert_ne!(manifest_digest(&rescaled, "v").unwrap(), base);
    assert_ne!(manifest_digest(&cfg, "w").unwrap(), base);
}

#[test]
fn config_file_resolves_relative_paths() {
    let cfg = RunConfig::load(&common::fixtures().join("run.toml")).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg.corpus, common::fixtures().join("corpus"));
    assert_eq!(cfg.models[0].script.as_deref(), Some(common::fixtures().join("mock.toml").as_path()));
    assert_eq!(cfg.seed, Some(42));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    /// However a run is split into chunks, the final cells match.
    #[test]
    fn chunked_runs_converge(chunks in proptest::collection::vec(1usize..12, 1..4)) {
        let dir = tempfile::tempdir().unwrap();
        let cfg = belief_only(dir.path());
        for c in &chunks {
            let s = cmd_run(&cfg, &RunOptions { limit: Some(*c) }).unwrap();
            prop_assert!(s.stats.is_consistent());
        }
        let last = cmd_run(&cfg, &RunOptions::default()).unwrap();
        prop_assert_eq!(last.stats.attempted, 24);
        prop_assert_eq!(last.attempted_now, 24 - chunks.iter().sum::<usize>().min(24));
        let other = tempfile::tempdir().unwrap();
        let straight = belief_only(other.path());
        cmd_run(&straight, &RunOptions::default()).unwrap();
        prop_assert_eq!(outcomes(&read_cells(&cfg.output_dir).unwrap()), outcomes(&read_cells(&straight.output_dir).unwrap()));
    }
}
