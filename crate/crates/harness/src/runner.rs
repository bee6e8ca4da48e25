//! Probe execution: plans every cell of a run, sends the pending ones
//! through the gateway, parses the replies and appends one record per
//! attempted cell to `cells.jsonl`. Reruns skip cells that already hold a
//! non-transient outcome.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use finbias_core::corpus::{stratify_companies, substitute_subject, Company};
use finbias_core::lottery::{Frame, Language, RiskClass};
use finbias_core::parse::{extract_choice, extract_score, sanitize_reasoning, ParseError, ParseStats, SanitizedReasoning};
use finbias_core::prompting::{interaction_text, render_event_prompt, render_risk_prompt, shuffle_options, Prompt};
use finbias_core::records::{OptionLabel, ProbeKind};
use finbias_core::{ChoiceRecord, Corpus, InputForm, ScoreRecord};
use serde::{Deserialize, Serialize};

use crate::cache::{now_secs, Cache, CacheError};
use crate::config::{ConfigError, ModelConfig, RunConfig};
use crate::corpus_io::{load_corpus, CorpusIoError};
use crate::gateway::{Gateway, GatewayError, Request, Source};
use crate::manifest::{RunManifest, RunStats};

pub const CELLS_FILE: &str = "cells.jsonl";
pub const PARSE_FAILURES_FILE: &str = "parse_failures.log";
pub const RUN_LOG_FILE: &str = "run.log";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusIoError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("gateway setup: {0}")]
    Gateway(#[from] GatewayError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CellTarget {
    Score { probe_kind: ProbeKind, probe_id: String, company_id: String },
    Choice { scenario_id: String, repetition: u32, frame: Frame, seed: u64, permutation: [RiskClass; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Score {
        score: i32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reasoning: Option<SanitizedReasoning>,
    },
    Choice { label: OptionLabel, risk_class: RiskClass },
    ParseError { error: ParseError },
    GatewayError { error_kind: String, message: String, transient: bool },
    PromptError { message: String },
}

impl CellOutcome {
    pub fn is_parsed(&self) -> bool {
        matches!(self, CellOutcome::Score { .. } | CellOutcome::Choice { .. })
    }

    /// A resume attempts the cell again.
    pub fn is_retryable(&self) -> bool {
        matches!(self, CellOutcome::GatewayError { transient: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: String,
    pub model_id: String,
    pub form: InputForm,
    pub language: Language,
    pub target: CellTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    pub outcome: CellOutcome,
}

impl CellRecord {
    pub fn score_record(&self) -> Option<ScoreRecord> {
        match (&self.target, &self.outcome) {
            (CellTarget::Score { probe_id, company_id, .. }, CellOutcome::Score { score, .. }) => Some(ScoreRecord {
                probe_id: probe_id.clone(),
                company_id: company_id.clone(),
                model_id: self.model_id.clone(),
                form: self.form,
                score: *score,
            }),
            _ => None,
        }
    }

    pub fn choice_record(&self) -> Option<ChoiceRecord> {
        match (&self.target, &self.outcome) {
            (CellTarget::Choice { scenario_id, repetition, frame, .. }, CellOutcome::Choice { label, risk_class }) => {
                Some(ChoiceRecord {
                    scenario_id: scenario_id.clone(),
                    repetition: *repetition,
                    model_id: self.model_id.clone(),
                    form: self.form,
                    language: self.language,
                    frame: *frame,
                    label: *label,
                    risk_class: *risk_class,
                })
            }
            _ => None,
        }
    }
}

/// A cell ready to send: its identity plus the rendered prompt (or the
/// reason rendering failed).
struct PlannedCell {
    record: CellRecord,
    prompt: Result<Prompt, String>,
    salt: u64,
}

fn score_cell_id(model: &str, form: InputForm, probe: &str, company: &str) -> String {
    format!("score|{model}|{}|{probe}|{company}", form.as_str())
}

fn choice_cell_id(model: &str, form: InputForm, lang: Language, scenario: &str, rep: u32) -> String {
    format!("choice|{model}|{}|{}|{scenario}|{rep}", form.as_str(), lang.as_str())
}

fn placeholder() -> CellOutcome {
    CellOutcome::PromptError { message: "not attempted".into() }
}

/// Companies admitted to the run, restricted to the selected tiers.
pub fn run_companies(corpus: &Corpus, cfg: &RunConfig) -> Result<Vec<Company>, ConfigError> {
    let set = stratify_companies(&corpus.companies, cfg.probes.per_tier)
        .map_err(|e| ConfigError::Invalid(format!("company stratification: {e}")))?;
    Ok(cfg.probes.tiers.iter().flat_map(|t| set.tier(*t).iter().cloned()).collect())
}

/// Renders a belief probe's text for one company.
type ProbeText<'a> = Box<dyn Fn(&Company) -> Result<String, String> + 'a>;

fn plan_model(corpus: &Corpus, companies: &[Company], cfg: &RunConfig, model: &ModelConfig) -> Vec<PlannedCell> {
    let seed = cfg.seed.unwrap_or(0);
    let mut cells = Vec::new();
    let mut belief: Vec<(ProbeKind, &str, ProbeText<'_>)> = Vec::new();
    if cfg.probes.news {
        for n in &corpus.news {
            if cfg.probes.news_ids.as_ref().is_some_and(|ids| !ids.contains(&n.id)) {
                continue;
            }
            belief.push((
                ProbeKind::News,
                &n.id,
                Box::new(move |c| substitute_subject(&n.body, c).map_err(|e| e.to_string())),
            ));
        }
    }
    if cfg.probes.interactions {
        for i in &corpus.interactions {
            belief.push((
                ProbeKind::Interaction,
                &i.id,
                Box::new(move |c| {
                    let q = substitute_subject(&i.question, c).map_err(|e| e.to_string())?;
                    let r = substitute_subject(&i.response, c).map_err(|e| e.to_string())?;
                    Ok(interaction_text(&q, &r))
                }),
            ));
        }
    }
    for &form in &cfg.forms {
        for (kind, id, text) in &belief {
            for c in companies {
                let prompt = text(c).and_then(|t| render_event_prompt(*kind, &t, form, cfg.scale).map_err(|e| e.to_string()));
                cells.push(PlannedCell {
                    record: CellRecord {
                        cell: score_cell_id(&model.model_id, form, id, &c.id),
                        model_id: model.model_id.clone(),
                        form,
                        language: Language::Zh,
                        target: CellTarget::Score { probe_kind: *kind, probe_id: id.to_string(), company_id: c.id.clone() },
                        request_key: None,
                        source: None,
                        outcome: placeholder(),
                    },
                    prompt,
                    salt: 0,
                });
            }
        }
    }
    if cfg.probes.risk {
        for &form in &cfg.risk_forms {
            for &lang in &cfg.languages {
                for s in &corpus.scenarios {
                    if cfg.probes.scenario_ids.as_ref().is_some_and(|ids| !ids.contains(&s.id)) {
                        continue;
                    }
                    for rep in 0..cfg.repetitions {
                        let presented = shuffle_options(s, seed + u64::from(rep));
                        let prompt = render_risk_prompt(s, &presented, form, lang).map_err(|e| e.to_string());
                        cells.push(PlannedCell {
                            record: CellRecord {
                                cell: choice_cell_id(&model.model_id, form, lang, &s.id, rep),
                                model_id: model.model_id.clone(),
                                form,
                                language: lang,
                                target: CellTarget::Choice {
                                    scenario_id: s.id.clone(),
                                    repetition: rep,
                                    frame: s.frame,
                                    seed: presented.seed,
                                    permutation: presented.permutation,
                                },
                                request_key: None,
                                source: None,
                                outcome: placeholder(),
                            },
                            prompt,
                            salt: u64::from(rep),
                        });
                    }
                }
            }
        }
    }
    cells
}

fn parse_reply(
    text: &str,
    record: &CellRecord,
    model: &ModelConfig,
    cfg: &RunConfig,
    companies: &BTreeMap<&str, &Company>,
) -> CellOutcome {
    match &record.target {
        CellTarget::Score { company_id, .. } => match extract_score(text, cfg.scale, &model.extract) {
            Ok(score) => {
                let reasoning = (record.form == InputForm::Cot)
                    .then(|| companies.get(company_id.as_str()))
                    .flatten()
                    .map(|c| sanitize_reasoning(text, c, Some(score), &model.extract));
                CellOutcome::Score { score, reasoning }
            }
            Err(error) => CellOutcome::ParseError { error },
        },
        CellTarget::Choice { permutation, .. } => match extract_choice(text, &model.extract) {
            Ok(label) => CellOutcome::Choice { label, risk_class: permutation[label.index()] },
            Err(error) => CellOutcome::ParseError { error },
        },
    }
}

/// Last record per cell id.
pub fn read_cells(run_dir: &Path) -> Result<BTreeMap<String, CellRecord>, RunError> {
    let path = run_dir.join(CELLS_FILE);
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let reader = BufReader::new(File::open(&path).map_err(io_err(&path))?);
    for line in reader.lines() {
        let line = line.map_err(io_err(&path))?;
        if let Ok(rec) = serde_json::from_str::<CellRecord>(&line) {
            out.insert(rec.cell.clone(), rec);
        } else if !line.trim().is_empty() {
            log::warn!("skipping unreadable line in {}", path.display());
        }
    }
    Ok(out)
}

pub fn tally<'a>(cells: impl IntoIterator<Item = &'a CellRecord>) -> RunStats {
    let mut s = RunStats::default();
    for rec in cells {
        s.attempted += 1;
        match &rec.outcome {
            CellOutcome::Score { .. } | CellOutcome::Choice { .. } => s.parse.record::<()>(&Ok(())),
            CellOutcome::ParseError { error } => s.parse.record::<()>(&Err(error.clone())),
            CellOutcome::GatewayError { .. } => s.gateway_errors += 1,
            CellOutcome::PromptError { .. } => s.prompt_errors += 1,
        }
    }
    s.parsed = s.parse.parsed;
    s.failed = s.attempted - s.parsed;
    s
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Attempt at most this many pending cells (simulates an interrupted run).
    pub limit: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub planned: usize,
    /// Cells sent in this invocation.
    pub attempted_now: usize,
    pub backend_calls: usize,
    pub stats: RunStats,
    pub parse_by_model: BTreeMap<String, ParseStats>,
}

impl RunSummary {
    pub fn exceeds_threshold(&self, threshold: f64) -> bool {
        self.stats.failure_rate() > threshold
    }
}

struct Logs {
    cells: File,
    parse_failures: File,
    run: File,
}

fn append(path: &Path) -> Result<File, RunError> {
    OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))
}

fn write_line(file: &mut File, path: &Path, line: &str) -> Result<(), RunError> {
    writeln!(file, "{line}").map_err(io_err(path))
}

pub fn cmd_run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    cfg.check_credentials()?;
    let corpus = load_corpus(&cfg.corpus)?;
    let companies = run_companies(&corpus, cfg)?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let mut manifest = RunManifest::build(cfg, &corpus.version, now_secs())?;
    manifest.write(&dir).map_err(io_err(&dir))?;

    let mut gateway = Gateway::new(Cache::open(&cfg.cache_dir)?);
    for m in &cfg.models {
        gateway.register_model(m)?;
    }
    let existing = read_cells(&dir)?;
    let by_id: BTreeMap<&str, &Company> = corpus.companies.iter().map(|c| (c.id.as_str(), c)).collect();
    let paths = [dir.join(CELLS_FILE), dir.join(PARSE_FAILURES_FILE), dir.join(RUN_LOG_FILE)];
    let mut logs = Logs { cells: append(&paths[0])?, parse_failures: append(&paths[1])?, run: append(&paths[2])? };

    let mut planned = 0;
    let mut budget = opts.limit.unwrap_or(usize::MAX);
    let mut attempted_now = 0;
    for model in &cfg.models {
        let cells = plan_model(&corpus, &companies, cfg, model);
        planned += cells.len();
        let pending: Vec<PlannedCell> = cells
            .into_iter()
            .filter(|c| existing.get(&c.record.cell).is_none_or(|r| r.outcome.is_retryable()))
            .take(budget)
            .collect();
        budget -= pending.len();
        attempted_now += pending.len();
        log::info!("model {}: {} pending cells", model.model_id, pending.len());

        let (ready, broken): (Vec<_>, Vec<_>) = pending.into_iter().partition(|c| c.prompt.is_ok());
        for mut c in broken {
            let message = c.prompt.err().unwrap_or_default();
            c.record.outcome = CellOutcome::PromptError { message: message.clone() };
            write_line(&mut logs.run, &paths[2], &format!("{}\tprompt\t{message}", c.record.cell))?;
            write_line(&mut logs.cells, &paths[0], &serde_json::to_string(&c.record).expect("cell serializes"))?;
        }
        let requests: Vec<Request> = ready
            .iter()
            .map(|c| Request { prompt: c.prompt.clone().expect("partitioned on Ok"), salt: c.salt })
            .collect();
        let responses = gateway.run_batch(&requests, model)?;
        for (mut c, response) in ready.into_iter().zip(responses) {
            c.record.outcome = match response {
                Ok(resp) => {
                    c.record.request_key = Some(resp.request_key);
                    c.record.source = Some(resp.source);
                    let outcome = parse_reply(&resp.text, &c.record, model, cfg, &by_id);
                    if let CellOutcome::ParseError { error } = &outcome {
                        let raw = serde_json::to_string(&resp.text).expect("string serializes");
                        write_line(&mut logs.parse_failures, &paths[1], &format!("{}\t{error}\t{raw}", c.record.cell))?;
                    }
                    outcome
                }
                Err(e) => {
                    write_line(&mut logs.run, &paths[2], &format!("{}\t{}\t{e}", c.record.cell, e.kind()))?;
                    log::warn!("{}: {e}", c.record.cell);
                    CellOutcome::GatewayError {
                        error_kind: e.kind().into(),
                        message: e.to_string(),
                        transient: e.is_transient(),
                    }
                }
            };
            write_line(&mut logs.cells, &paths[0], &serde_json::to_string(&c.record).expect("cell serializes"))?;
        }
    }
    drop(logs);

    let all = read_cells(&dir)?;
    let stats = tally(all.values());
    let parse_by_model = cfg
        .models
        .iter()
        .map(|m| (m.model_id.clone(), tally(all.values().filter(|r| r.model_id == m.model_id)).parse))
        .collect();
    manifest.finished_at = Some(now_secs());
    manifest.completion = Some(stats);
    manifest.write(&dir).map_err(io_err(&dir))?;
    Ok(RunSummary {
        run_dir: dir,
        planned,
        attempted_now,
        backend_calls: gateway.backend_calls(),
        stats,
        parse_by_model,
    })
}
