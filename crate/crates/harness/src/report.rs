//! Emits the report directory: CSV and JSON tables, distribution summaries,
//! cluster listings and a report manifest.
//!
//! Every number goes through `sig8`, rows are sorted by stable keys and no
//! timestamps or absolute paths are written, so identical analyses produce
//! byte-identical directories.

use std::path::{Path, PathBuf};

use finbias_core::fmt::sig8;
use finbias_core::indicators::{Indicator, ModelIndicators};
use finbias_core::lottery::RiskClass;
use serde_json::{json, Value};

use crate::analysis::Analysis;

pub const REPORT_MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("no models to report")]
    NoModels,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    Num(f64),
    Na,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => sig8(*x),
            Cell::Na => "n/a".into(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Text(s) => json!(s),
            Cell::Int(i) => json!(i),
            // Round-trip through the rendered text so JSON and CSV agree.
            Cell::Num(x) if x.is_finite() => json!(sig8(*x).parse::<f64>().expect("sig8 output parses")),
            Cell::Num(x) => json!(sig8(*x)),
            Cell::Na => Value::Null,
        }
    }
}

fn text(s: impl Into<String>) -> Cell {
    Cell::Text(s.into())
}

fn int(n: usize) -> Cell {
    Cell::Int(n as i64)
}

fn opt(x: Option<f64>) -> Cell {
    x.map_or(Cell::Na, Cell::Num)
}

fn ind(x: &Indicator<f64>) -> Cell {
    opt(x.get().copied())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Table { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "{}", self.name);
        self.rows.push(row);
    }

    pub fn to_json(&self) -> Value {
        json!({
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(Cell::json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    /// Column values rendered as CSV text.
    pub fn column(&self, name: &str) -> Option<Vec<String>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[i].render()).collect())
    }
}

/// File-system safe rendering of a model id.
pub fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect()
}

fn variance_table(models: &[ModelIndicators]) -> Table {
    let mut t = Table::new("variance", &["model_id", "avg_variance_index", "n_probes", "mean_stddev"]);
    let mut sorted: Vec<&ModelIndicators> = models.iter().collect();
    // Ascending, unavailable last, ties by id.
    sorted.sort_by(|a, b| match (a.avg_variance_index.get(), b.avg_variance_index.get()) {
        (Some(x), Some(y)) => x.total_cmp(y).then_with(|| a.model_id.cmp(&b.model_id)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.model_id.cmp(&b.model_id),
    });
    for m in sorted {
        t.push(vec![text(&m.model_id), ind(&m.avg_variance_index), int(m.avg_variance_index.n()), ind(&m.mean_stddev)]);
    }
    t
}

fn cot_table(models: &[ModelIndicators]) -> Table {
    let mut t = Table::new("cot_variance", &["model_id", "direct_variance_index", "cot_variance_index", "cot_delta", "n_probes"]);
    for m in models {
        let direct = match (m.cot_variance_index.get(), m.cot_delta.get()) {
            (Some(c), Some(d)) => Some(c - d),
            _ => None,
        };
        t.push(vec![text(&m.model_id), opt(direct), ind(&m.cot_variance_index), ind(&m.cot_delta), int(m.cot_delta.n())]);
    }
    t
}

fn positive_table(models: &[ModelIndicators]) -> Table {
    let mut t = Table::new("positive_times", &["model_id", "positive_times", "n_probes"]);
    for m in models {
        let v = m.positive_times.get().map_or(Cell::Na, |&p| int(p));
        t.push(vec![text(&m.model_id), v, int(m.positive_times.n())]);
    }
    t
}

fn representativeness_table(models: &[ModelIndicators]) -> Table {
    let mut t = Table::new(
        "representativeness",
        &["model_id", "spearman_cap", "n_companies", "industry_f", "df_between", "df_within", "industry_p", "n_scores"],
    );
    for m in models {
        let a = m.industry_anova.get();
        t.push(vec![
            text(&m.model_id),
            ind(&m.spearman_cap),
            int(m.spearman_cap.n()),
            opt(a.map(|a| a.f)),
            a.map_or(Cell::Na, |a| int(a.df_between)),
            a.map_or(Cell::Na, |a| int(a.df_within)),
            opt(a.map(|a| a.p_value)),
            int(m.industry_anova.n()),
        ]);
    }
    t
}

fn anchoring_table(models: &[ModelIndicators]) -> Table {
    let mut t =
        Table::new("anchoring", &["model_id", "probe_id", "f", "df_between", "df_within", "p_value", "n", "note"]);
    for m in models {
        for row in &m.anchoring {
            let (a, note) = match &row.anova {
                Indicator::Value { value, .. } => (Some(value), String::new()),
                Indicator::NotAvailable { reason } => (None, reason.clone()),
            };
            t.push(vec![
                text(&m.model_id),
                text(&row.probe_id),
                opt(a.map(|a| a.f)),
                a.map_or(Cell::Na, |a| int(a.df_between)),
                a.map_or(Cell::Na, |a| int(a.df_within)),
                opt(a.map(|a| a.p_value)),
                int(row.anova.n()),
                text(note),
            ]);
        }
    }
    t
}

fn dispersion_table(models: &[ModelIndicators]) -> Table {
    let mut t = Table::new("probe_dispersion", &["model_id", "form", "probe_id", "n", "mean", "variance", "stddev"]);
    for m in models {
        for d in &m.probe_dispersion {
            t.push(vec![
                text(&m.model_id),
                text(d.form.as_str()),
                text(&d.probe_id),
                int(d.n),
                Cell::Num(d.mean),
                opt(d.variance),
                opt(d.stddev),
            ]);
        }
    }
    t
}

fn preference_table(models: &[ModelIndicators]) -> Table {
    let mut t = Table::new(
        "risk_preferences",
        &["model_id", "input", "frame", "averse", "neutral", "loving", "total", "averse_pct"],
    );
    for m in models {
        for row in &m.preference_tallies {
            let tally = &row.tally;
            t.push(vec![
                text(&m.model_id),
                text(&row.input),
                text(row.frame.map_or("pooled", |f| f.as_str())),
                int(tally.averse),
                int(tally.neutral),
                int(tally.loving),
                int(tally.total()),
                opt(tally.share_pct(RiskClass::Averse).ok()),
            ]);
        }
    }
    t
}

fn scenario_table(models: &[ModelIndicators]) -> Table {
    let mut t =
        Table::new("scenario_preferences", &["model_id", "scenario_id", "input", "averse", "neutral", "loving", "total"]);
    for m in models {
        for row in &m.scenario_tallies {
            let tally = &row.tally;
            t.push(vec![
                text(&m.model_id),
                text(&row.scenario_id),
                text(&row.input),
                int(tally.averse),
                int(tally.neutral),
                int(tally.loving),
                int(tally.total()),
            ]);
        }
    }
    t
}

fn risk_indicator_table(models: &[ModelIndicators]) -> Table {
    let mut t = Table::new(
        "risk_indicators",
        &[
            "model_id",
            "instruct_aversion_pct",
            "instruct_n",
            "translation_diff_pct",
            "translation_pairs",
            "loss_aversion_pct",
            "loss_n",
            "situational_dependence_pct",
            "situational_n",
        ],
    );
    for m in models {
        t.push(vec![
            text(&m.model_id),
            ind(&m.instruct_aversion_pct),
            int(m.instruct_aversion_pct.n()),
            ind(&m.translation_diff_pct),
            int(m.translation_diff_pct.n()),
            ind(&m.loss_aversion_pct),
            int(m.loss_aversion_pct.n()),
            ind(&m.situational_dependence_pct),
            int(m.situational_dependence_pct.n()),
        ]);
    }
    t
}

fn instability_table(models: &[ModelIndicators]) -> Table {
    let mut t = Table::new("score_instability", &["model_id", "delta", "docs", "clusters", "note"]);
    for m in models {
        let row = match &m.score_instability {
            Indicator::Value { value, .. } => vec![
                text(&m.model_id),
                Cell::Num(value.scores.delta),
                int(value.docs),
                int(value.scores.clusters.len()),
                text(""),
            ],
            Indicator::NotAvailable { reason } => {
                vec![text(&m.model_id), Cell::Na, int(0), int(0), text(reason)]
            }
        };
        t.push(row);
    }
    t
}

fn families_table(models: &[ModelIndicators]) -> Table {
    let mut t = Table::new("families", &["model_id", "family", "available"]);
    for m in models {
        for (family, available) in m.families() {
            t.push(vec![text(&m.model_id), text(family), text(if available { "yes" } else { "n/a" })]);
        }
    }
    t
}

fn parse_table(a: &Analysis) -> Table {
    let mut t = Table::new(
        "parse_stats",
        &["model_id", "total", "parsed", "unparseable", "out_of_range", "no_label", "conflicting"],
    );
    for (model, p) in &a.parse_by_model {
        t.push(vec![
            text(model),
            int(p.total),
            int(p.parsed),
            int(p.unparseable),
            int(p.out_of_range),
            int(p.no_label),
            int(p.conflicting),
        ]);
    }
    t
}

/// All indicator tables in emission order.
pub fn tables(a: &Analysis) -> Vec<Table> {
    let m = &a.report.models;
    vec![
        variance_table(m),
        cot_table(m),
        positive_table(m),
        representativeness_table(m),
        anchoring_table(m),
        dispersion_table(m),
        preference_table(m),
        scenario_table(m),
        risk_indicator_table(m),
        instability_table(m),
        families_table(m),
        parse_table(a),
    ]
}

fn distribution_summary(a: &Analysis) -> Table {
    let mut t = Table::new(
        "summary",
        &["model_id", "form", "probe_id", "n", "mean", "variance", "min", "q1", "median", "q3", "max"],
    );
    for d in &a.distributions {
        let s = &d.summary;
        t.push(vec![
            text(&d.model_id),
            text(d.form.as_str()),
            text(&d.probe_id),
            int(s.n),
            Cell::Num(s.mean),
            opt(s.variance),
            Cell::Num(s.min),
            Cell::Num(s.q1),
            Cell::Num(s.median),
            Cell::Num(s.q3),
            Cell::Num(s.max),
        ]);
    }
    t
}

fn histograms(a: &Analysis, model: &str) -> Value {
    let rows: Vec<Value> = a
        .distributions
        .iter()
        .filter(|d| d.model_id == model)
        .map(|d| {
            json!({
                "form": d.form.as_str(),
                "probe_id": d.probe_id,
                "edges": d.summary.histogram.edges.iter().map(|&e| Cell::Num(e).json()).collect::<Vec<_>>(),
                "counts": d.summary.histogram.counts,
            })
        })
        .collect();
    json!({ "model_id": model, "histograms": rows })
}

fn write_file(path: &Path, contents: &str) -> Result<(), ReportError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.into(), source })?;
    }
    std::fs::write(path, contents).map_err(|source| ReportError::Io { path: path.into(), source })
}

fn write_json(path: &Path, v: &Value) -> Result<(), ReportError> {
    write_file(path, &(serde_json::to_string_pretty(v).expect("json value serializes") + "\n"))
}

fn write_csv(path: &Path, t: &Table) -> Result<(), ReportError> {
    let csv_err = |source| ReportError::Csv { path: path.into(), source };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&t.columns).map_err(csv_err)?;
    for row in &t.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io { path: path.into(), source: e.into_error() })?;
    write_file(path, &String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_table(dir: &Path, t: &Table) -> Result<(), ReportError> {
    write_csv(&dir.join(format!("{}.csv", t.name)), t)?;
    write_json(&dir.join(format!("{}.json", t.name)), &t.to_json())
}

fn write_clusters(a: &Analysis, out: &Path) -> Result<(), ReportError> {
    let dir = out.join("clusters");
    for c in &a.clusters {
        let model_dir = dir.join(file_stem(&c.model_id));
        let mut kw = Table::new("keywords", &["cluster", "rank", "term", "weight"]);
        for (cluster, words) in c.keywords.clusters.iter().enumerate() {
            for (rank, k) in words.iter().enumerate() {
                kw.push(vec![int(cluster), int(rank + 1), text(&k.term), Cell::Num(k.weight)]);
            }
        }
        write_csv(&model_dir.join("keywords.csv"), &kw)?;
        let mut assign = Table::new("assignments", &["cell", "cluster", "score"]);
        for (i, cell) in c.cells.iter().enumerate() {
            assign.push(vec![text(cell), int(c.assignment.labels[i]), Cell::Num(c.scores[i])]);
        }
        write_csv(&model_dir.join("assignments.csv"), &assign)?;
        if let Some(stats) = a
            .report
            .models
            .iter()
            .find(|m| m.model_id == c.model_id)
            .and_then(|m| m.score_instability.get())
        {
            let mut s = Table::new("scores", &["cluster", "count", "mean", "variance", "min", "max"]);
            for st in &stats.scores.clusters {
                s.push(vec![int(st.cluster), int(st.count), Cell::Num(st.mean), opt(st.variance), Cell::Num(st.min), Cell::Num(st.max)]);
            }
            write_csv(&model_dir.join("scores.csv"), &s)?;
        }
    }
    if !a.clusters.is_empty() {
        let mut wf = Table::new("word_frequencies", &["term", "clusters"]);
        for (term, n) in &a.word_frequencies {
            wf.push(vec![text(term), int(*n)]);
        }
        write_csv(&dir.join("word_frequencies.csv"), &wf)?;
    }
    Ok(())
}

/// Write the report directory under `out`, replacing files of the same name.
pub fn emit_report(a: &Analysis, out: &Path) -> Result<(), ReportError> {
    if a.report.models.is_empty() {
        return Err(ReportError::NoModels);
    }
    let tables_dir = out.join("tables");
    for t in tables(a) {
        write_table(&tables_dir, &t)?;
    }
    let dist_dir = out.join("distributions");
    write_csv(&dist_dir.join("summary.csv"), &distribution_summary(a))?;
    for m in &a.report.models {
        write_json(&dist_dir.join(format!("{}.json", file_stem(&m.model_id))), &histograms(a, &m.model_id))?;
    }
    write_clusters(a, out)?;
    write_json(
        &out.join(REPORT_MANIFEST_FILE),
        &json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "digest": a.digest,
            "reproducibility": a.reproducibility,
            "run": a.stats,
            "models": a.report.models.iter().map(|m| &m.model_id).collect::<Vec<_>>(),
        }),
    )
}
