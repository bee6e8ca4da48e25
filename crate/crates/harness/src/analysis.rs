//! Turns a run directory into indicator values, distribution summaries and
//! reasoning clusters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use finbias_core::indicators::{compute_bias_report, compute_model_indicators, Indicator, IndicatorConfig, MatrixError, ScoreInstability};
use finbias_core::parse::ParseStats;
use finbias_core::summary::{summarize_distribution, DistributionSummary};
use finbias_core::topics::{
    cluster_embeddings, cluster_score_stats, ctfidf_keywords, tokenize, word_frequencies, ClusterAssignment,
    KeywordSet, TopicError,
};
use finbias_core::{BiasReport, InputForm, ScoreMatrix, ScoreScale};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cache::{Cache, CacheError};
use crate::config::{ConfigError, RunConfig};
use crate::corpus_io::{load_corpus, CorpusIoError};
use crate::gateway::{Gateway, GatewayError};
use crate::manifest::{reproducibility_fields, RunManifest, RunStats};
use crate::runner::{read_cells, tally, CellOutcome, CellRecord, CellTarget, RunError};

pub const ANALYSIS_FILE: &str = "analysis.json";

#[derive(Debug, thiserror::Error)]
pub enum AnalyzeError {
    #[error("run directory {0}: {1}")]
    Manifest(PathBuf, std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusIoError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("embedding: {0}")]
    Embedding(#[from] GatewayError),
    #[error("clustering: {0}")]
    Topic(#[from] TopicError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub model_id: String,
    pub form: InputForm,
    pub probe_id: String,
    pub summary: DistributionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClusters {
    pub model_id: String,
    /// Cell ids of the clustered reasoning texts, in assignment order.
    pub cells: Vec<String>,
    pub scores: Vec<f64>,
    pub assignment: ClusterAssignment,
    pub keywords: KeywordSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub digest: String,
    pub reproducibility: Value,
    pub scale: ScoreScale,
    pub stats: RunStats,
    pub parse_by_model: BTreeMap<String, ParseStats>,
    pub report: BiasReport,
    pub distributions: Vec<DistributionRow>,
    pub clusters: Vec<ModelClusters>,
    pub word_frequencies: Vec<(String, usize)>,
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub skip_clustering: bool,
    /// Use this corpus instead of the path recorded in the run manifest.
    pub corpus: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
}

fn distributions(matrix: &ScoreMatrix, models: &[String], scale: ScoreScale, cfg: &RunConfig) -> Vec<DistributionRow> {
    let mut rows = Vec::new();
    for model in models {
        for form in matrix.forms(model) {
            for (probe, row) in matrix.probes(model, form) {
                let xs: Vec<f64> = row.values().map(|&s| f64::from(s)).collect();
                if let Ok(summary) = summarize_distribution(&xs, Some(scale), cfg.estimator) {
                    rows.push(DistributionRow { model_id: model.clone(), form, probe_id: probe.into(), summary });
                }
            }
        }
    }
    rows
}

/// Sanitized cot reasoning with its score, ordered by cell id.
fn reasoning_docs<'a>(cells: &'a BTreeMap<String, CellRecord>, model: &str) -> Vec<(&'a str, &'a str, f64)> {
    cells
        .values()
        .filter(|r| r.model_id == model && r.form == InputForm::Cot && matches!(r.target, CellTarget::Score { .. }))
        .filter_map(|r| match &r.outcome {
            CellOutcome::Score { score, reasoning: Some(text) } if !text.empty => {
                Some((r.cell.as_str(), text.text.as_str(), f64::from(*score)))
            }
            _ => None,
        })
        .collect()
}

fn cluster_model(
    gateway: &Gateway,
    cfg: &RunConfig,
    cells: &BTreeMap<String, CellRecord>,
    model: &str,
) -> Result<Option<ModelClusters>, AnalyzeError> {
    let Some(embedder) = &cfg.embedder else { return Ok(None) };
    let docs = reasoning_docs(cells, model);
    if docs.len() < 2 {
        return Ok(None);
    }
    let texts: Vec<String> = docs.iter().map(|(_, t, _)| t.to_string()).collect();
    let vectors = gateway.embed(&texts, embedder)?;
    let k = cfg.clustering.k.min(docs.len());
    let assignment = cluster_embeddings(&vectors, k, cfg.seed()?)?;
    let mut terms: Vec<Vec<String>> = vec![Vec::new(); k];
    for (i, text) in texts.iter().enumerate() {
        terms[assignment.labels[i]].extend(tokenize(text));
    }
    let keywords = match ctfidf_keywords(&terms, cfg.clustering.top_n) {
        Ok(k) => k,
        Err(TopicError::EmptyVocabulary) => KeywordSet { clusters: vec![Vec::new(); k] },
        Err(e) => return Err(e.into()),
    };
    Ok(Some(ModelClusters {
        model_id: model.into(),
        cells: docs.iter().map(|(c, _, _)| c.to_string()).collect(),
        scores: docs.iter().map(|(_, _, s)| *s).collect(),
        assignment,
        keywords,
    }))
}

pub fn analyze_run(run_dir: &Path, opts: &AnalyzeOptions) -> Result<Analysis, AnalyzeError> {
    let manifest = RunManifest::read(run_dir).map_err(|e| AnalyzeError::Manifest(run_dir.into(), e))?;
    let cfg = manifest.config;
    let corpus = load_corpus(opts.corpus.as_deref().unwrap_or(&cfg.corpus))?;
    let cells = read_cells(run_dir)?;
    let stats = tally(cells.values());

    let matrix = ScoreMatrix::from_records(cells.values().filter_map(CellRecord::score_record).collect::<Vec<_>>().iter(), cfg.scale)?;
    let choices: Vec<_> = cells.values().filter_map(CellRecord::choice_record).collect();
    let indicator_cfg = IndicatorConfig {
        estimator: cfg.estimator,
        variance_probes: cfg.variance_probes.clone(),
        positive_probes: cfg.positive_probes.clone(),
    };
    let mut report = compute_bias_report(&corpus, &matrix, &choices, &indicator_cfg);
    // Configured models without a single parsed cell still get an all-n/a row.
    for m in &cfg.models {
        if !report.models.iter().any(|r| r.model_id == m.model_id) {
            report.models.push(compute_model_indicators(&m.model_id, &corpus, &matrix, &[], &indicator_cfg));
        }
    }
    report.models.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    let models: Vec<String> = report.models.iter().map(|m| m.model_id.clone()).collect();
    let parse_by_model =
        models.iter().map(|m| (m.clone(), tally(cells.values().filter(|r| &r.model_id == m)).parse)).collect();

    let mut clusters = Vec::new();
    if !opts.skip_clustering {
        if let Some(embedder) = &cfg.embedder {
            let mut gateway = Gateway::new(Cache::open(opts.cache_dir.as_deref().unwrap_or(&cfg.cache_dir))?);
            gateway.register_embedder(embedder);
            for model in &models {
                if let Some(c) = cluster_model(&gateway, &cfg, &cells, model)? {
                    clusters.push(c);
                }
            }
        }
    }
    for m in &mut report.models {
        m.score_instability = match clusters.iter().find(|c| c.model_id == m.model_id) {
            Some(c) => {
                let scores = cluster_score_stats(&c.assignment, &c.scores)?;
                Indicator::value(ScoreInstability { docs: c.cells.len(), scores, keywords: c.keywords.clone() }, c.cells.len())
            }
            None if opts.skip_clustering || cfg.embedder.is_none() => Indicator::na("clustering not performed"),
            None => Indicator::na("fewer than two non-empty reasoning texts"),
        };
    }
    let keyword_sets: Vec<KeywordSet> = clusters.iter().map(|c| c.keywords.clone()).collect();

    Ok(Analysis {
        digest: manifest.digest,
        reproducibility: reproducibility_fields(&cfg, &manifest.corpus_version)?,
        scale: cfg.scale,
        stats,
        parse_by_model,
        distributions: distributions(&matrix, &models, cfg.scale, &cfg),
        report,
        clusters,
        word_frequencies: word_frequencies(&keyword_sets),
    })
}

impl Analysis {
    pub fn save(&self, run_dir: &Path) -> Result<(), AnalyzeError> {
        let path = run_dir.join(ANALYSIS_FILE);
        let text = serde_json::to_string_pretty(self).expect("analysis serializes");
        std::fs::write(&path, text + "\n").map_err(|source| AnalyzeError::Io { path, source })
    }

    pub fn load(run_dir: &Path) -> Result<Self, AnalyzeError> {
        let path = run_dir.join(ANALYSIS_FILE);
        let text = std::fs::read_to_string(&path).map_err(|source| AnalyzeError::Io { path: path.clone(), source })?;
        serde_json::from_str(&text).map_err(|e| AnalyzeError::Format { path, message: e.to_string() })
    }
}
