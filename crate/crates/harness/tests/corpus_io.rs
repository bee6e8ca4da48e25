mod common;

use std::fs;

use finbias::corpus_io::{load_corpus, read_corpus, read_manifest, save_corpus, CorpusIoError, RecordCounts};

#[test]
fn fixture_corpus_loads_with_declared_counts() {
    let corpus = load_corpus(&common::fixtures().join("corpus")).unwrap();
    assert_eq!(corpus.version, "fixture-1");
    assert_eq!(
        RecordCounts::of(&corpus),
        RecordCounts { news: 2, interactions: 1, companies: 6, scenarios: 2 }
    );
}

#[test]
fn save_then_load_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::synthetic_corpus(5, 9);
    save_corpus(&corpus, dir.path()).unwrap();
    let back = load_corpus(dir.path()).unwrap();
    assert_eq!(back, corpus);
    assert_eq!(read_manifest(dir.path()).unwrap().counts, RecordCounts::of(&corpus));
}

#[test]
fn st_company_is_a_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = common::synthetic_corpus(1, 6);
    corpus.companies[2].st_flag = true;
    save_corpus(&corpus, dir.path()).unwrap();
    // Schema-level read succeeds; validation rejects.
    assert!(read_corpus(dir.path()).is_ok());
    match load_corpus(dir.path()) {
        Err(CorpusIoError::Invalid(v)) => assert!(v.iter().any(|v| v.field == "st_flag" && v.record_id == "c0002")),
        other => panic!("expected violations, got {other:?}"),
    }
}

#[test]
fn missing_manifest_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&common::synthetic_corpus(1, 6), dir.path()).unwrap();
    fs::remove_file(dir.path().join("manifest.json")).unwrap();
    assert!(matches!(load_corpus(dir.path()), Err(CorpusIoError::MissingManifest(_))));
}

#[test]
fn count_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&common::synthetic_corpus(2, 6), dir.path()).unwrap();
    let news = dir.path().join("news.jsonl");
    let first = fs::read_to_string(&news).unwrap().lines().next().unwrap().to_string();
    fs::write(&news, first + "\n").unwrap();
    match load_corpus(dir.path()) {
        Err(CorpusIoError::CountMismatch { declared: 2, found: 1, .. }) => {}
        other => panic!("expected count mismatch, got {other:?}"),
    }
}

#[test]
fn schema_error_names_file_line_and_record() {
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&common::synthetic_corpus(2, 6), dir.path()).unwrap();
    let news = dir.path().join("news.jsonl");
    let text = fs::read_to_string(&news).unwrap().replacen("\"emotion\":\"mixed\"", "\"emotion\":\"ecstatic\"", 1);
    fs::write(&news, text).unwrap();
    match load_corpus(dir.path()) {
        Err(CorpusIoError::Schema { file, line, record, .. }) => {
            assert_eq!((file.as_str(), line, record.as_str()), ("news.jsonl", 2, "n001"));
        }
        other => panic!("expected schema error, got {other:?}"),
    }
}
