#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use finbias::config::{ClusteringConfig, EmbedderConfig, ModelConfig, ProbeSelection, RunConfig};
use finbias::corpus_io::save_corpus;
use finbias::mock::MockScript;
use finbias_core::corpus::Emotion;
use finbias_core::lottery::{generate_scenario, Frame, Localized, VarianceLadder};
use finbias_core::taxonomy::EventType;
use finbias_core::{Company, Corpus, EventNews, InputForm, Language, ScoreScale, Tier};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Copy the fixture directory into `dir` so runs can write next to it.
pub fn stage(dir: &Path) -> PathBuf {
    let dest = dir.join("fixtures");
    copy_dir(&fixtures(), &dest);
    dest
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), &target).unwrap();
        }
    }
}

const INDUSTRIES: [&str; 6] = ["钢铁", "银行", "电力", "医药", "软件", "食品"];

pub fn company(i: usize, n: usize) -> Company {
    let tier = match 3 * i / n {
        0 => Tier::Top,
        1 => Tier::Middle,
        _ => Tier::Bottom,
    };
    Company {
        id: format!("c{i:04}"),
        display_name: format!("测试{i}号股份"),
        pseudonym: format!("化名{i}号"),
        industry: INDUSTRIES[i % INDUSTRIES.len()].into(),
        market_cap: 1000.0 * (n - i) as f64,
        tier,
        st_flag: false,
    }
}

const BODIES: [(&str, Emotion); 4] = [
    ("{COMPANY}公告拟回购公司股份，回购金额约占总市值的1%。", Emotion::Positive),
    ("{COMPANY}预计本年度净利润同比下降约三成，但收入增长约一成。", Emotion::Mixed),
    ("{COMPANY}控股股东拟减持不超过总股本的2%。", Emotion::Negative),
    ("{COMPANY}召开年度股东大会，审议通过全部议案。", Emotion::Neutral),
];

/// A valid corpus with `news` items, `companies` companies and two risk
/// scenarios (one per frame).
pub fn synthetic_corpus(news: usize, companies: usize) -> Corpus {
    let news = (0..news)
        .map(|i| {
            let (body, emotion) = BODIES[i % BODIES.len()];
            EventNews {
                id: format!("n{i:03}"),
                event_type: EventType::ALL[i % EventType::ALL.len()],
                body: format!("{body}（第{i}条）"),
                emotion,
                numbers_abstracted: true,
            }
        })
        .collect();
    let scenarios = [("r01", Frame::Gain, 100.0), ("r02", Frame::Loss, 200.0)]
        .into_iter()
        .map(|(id, frame, mean)| {
            let prompt = Localized { zh: format!("情景{id}，请选择。"), en: Some(format!("Scenario {id}. Choose.")) };
            generate_scenario(id, "career", prompt, mean, VarianceLadder::default_for(mean), frame).unwrap()
        })
        .collect();
    Corpus {
        version: format!("synthetic-{companies}"),
        news,
        interactions: Vec::new(),
        companies: (0..companies).map(|i| company(i, companies)).collect(),
        scenarios,
    }
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) -> PathBuf {
    let path = dir.join("corpus");
    save_corpus(corpus, &path).unwrap();
    path
}

pub fn write_script(dir: &Path, name: &str, script: &MockScript) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, toml::to_string(script).unwrap()).unwrap();
    path
}

/// Mock-only run config rooted at `dir`.
pub fn mock_config(dir: &Path, corpus: &Path, script: &Path, per_tier: usize) -> RunConfig {
    RunConfig {
        corpus: corpus.into(),
        output_dir: dir.join("run"),
        cache_dir: dir.join("cache"),
        seed: Some(42),
        repetitions: 5,
        scale: ScoreScale::default(),
        estimator: Default::default(),
        forms: vec![InputForm::Direct, InputForm::Cot],
        risk_forms: vec![InputForm::Direct, InputForm::Instruct, InputForm::Cot],
        languages: vec![Language::Zh, Language::En],
        probes: ProbeSelection { interactions: false, per_tier, ..ProbeSelection::default() },
        models: vec![ModelConfig::mock("mock-a", script)],
        embedder: Some(EmbedderConfig::mock(32)),
        clustering: ClusteringConfig { k: 3, top_n: 5 },
        variance_probes: None,
        positive_probes: None,
        partial_failure_threshold: 0.2,
    }
}

pub fn fixture_script() -> MockScript {
    MockScript::load(&fixtures().join("mock.toml")).unwrap()
}

/// Every file under `dir` as (relative path, bytes), sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            walk(root, &path, out);
        } else {
            let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            out.push((rel, fs::read(&path).unwrap()));
        }
    }
}
