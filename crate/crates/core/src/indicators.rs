//! The per-model indicator battery computed from parsed scores and choices.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Company, Corpus, Emotion};
use crate::lottery::{Frame, Language};
use crate::records::{ChoiceRecord, InputForm, ScoreRecord, ScoreScale};
use crate::stats::{
    anova_f, aversion_pct, cot_delta, dispersion, framing_diff, loss_aversion_pct, spearman, tally_preferences,
    Anova, Estimator, PreferenceTally, StatsError,
};
use crate::topics::{ClusterScores, KeywordSet};

/// A statistic together with the number of observations behind it, or the
/// reason it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Indicator<T> {
    Value { value: T, n: usize },
    NotAvailable { reason: String },
}

impl<T> Indicator<T> {
    pub fn value(value: T, n: usize) -> Self {
        Indicator::Value { value, n }
    }

    pub fn na(reason: impl Into<String>) -> Self {
        Indicator::NotAvailable { reason: reason.into() }
    }

    pub fn get(&self) -> Option<&T> {
        match self {
            Indicator::Value { value, .. } => Some(value),
            Indicator::NotAvailable { .. } => None,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Indicator::Value { n, .. } => *n,
            Indicator::NotAvailable { .. } => 0,
        }
    }

    pub fn is_available(&self) -> bool {
        matches!(self, Indicator::Value { .. })
    }
}

fn from_stats<T>(r: Result<T, StatsError>, n: usize) -> Indicator<T> {
    match r {
        Ok(v) => Indicator::value(v, n),
        Err(e) => Indicator::na(e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatrixError {
    #[error("duplicate cell ({model}, {form}, {probe}, {company})")]
    Duplicate { model: String, form: &'static str, probe: String, company: String },
    #[error("score {score} outside scale [{min}, {max}]")]
    OutOfScale { score: i32, min: i32, max: i32 },
}

type ProbeTable = BTreeMap<String, BTreeMap<String, i32>>;

/// Scores indexed by (model, form) → probe → company.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreMatrix {
    scale: ScoreScale,
    cells: BTreeMap<(String, InputForm), ProbeTable>,
    len: usize,
}

impl ScoreMatrix {
    pub fn new(scale: ScoreScale) -> Self {
        ScoreMatrix { scale, cells: BTreeMap::new(), len: 0 }
    }

    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a ScoreRecord>,
        scale: ScoreScale,
    ) -> Result<Self, MatrixError> {
        let mut m = ScoreMatrix::new(scale);
        for r in records {
            m.insert(r)?;
        }
        Ok(m)
    }

    pub fn insert(&mut self, r: &ScoreRecord) -> Result<(), MatrixError> {
        if !self.scale.contains(i64::from(r.score)) {
            return Err(MatrixError::OutOfScale { score: r.score, min: self.scale.min, max: self.scale.max });
        }
        let row = self
            .cells
            .entry((r.model_id.clone(), r.form))
            .or_default()
            .entry(r.probe_id.clone())
            .or_default();
        if row.insert(r.company_id.clone(), r.score).is_some() {
            return Err(MatrixError::Duplicate {
                model: r.model_id.clone(),
                form: r.form.as_str(),
                probe: r.probe_id.clone(),
                company: r.company_id.clone(),
            });
        }
        self.len += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn scale(&self) -> ScoreScale {
        self.scale
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(m, _)| m.as_str()).collect()
    }

    pub fn forms(&self, model: &str) -> Vec<InputForm> {
        self.cells.keys().filter(|(m, _)| m == model).map(|(_, f)| *f).collect()
    }

    pub fn probes(&self, model: &str, form: InputForm) -> impl Iterator<Item = (&str, &BTreeMap<String, i32>)> {
        self.cells
            .get(&(model.to_string(), form))
            .into_iter()
            .flat_map(|t| t.iter().map(|(p, row)| (p.as_str(), row)))
    }

    /// Scores for one probe, ordered by company id.
    pub fn probe_scores(&self, model: &str, form: InputForm, probe: &str) -> Vec<(&str, f64)> {
        self.cells
            .get(&(model.to_string(), form))
            .and_then(|t| t.get(probe))
            .map(|row| row.iter().map(|(c, &s)| (c.as_str(), f64::from(s))).collect())
            .unwrap_or_default()
    }
}

/// Which probes feed which statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConfig {
    pub estimator: Estimator,
    /// Probes averaged by the variance indices; `None` means every probe.
    #[serde(default)]
    pub variance_probes: Option<Vec<String>>,
    /// Probes counted by `positive_times`; `None` means every news item
    /// with mixed emotion.
    #[serde(default)]
    pub positive_probes: Option<Vec<String>>,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        IndicatorConfig { estimator: Estimator::Sample, variance_probes: None, positive_probes: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeDispersion {
    pub probe_id: String,
    pub form: InputForm,
    pub n: usize,
    pub mean: f64,
    /// `None` when fewer than two companies were scored.
    pub variance: Option<f64>,
    pub stddev: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAnova {
    pub probe_id: String,
    pub anova: Indicator<Anova>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyRow {
    /// `direct`, `instruct`, `translation` or `{form}-{language}`.
    pub input: String,
    /// `None` pools both frames.
    pub frame: Option<Frame>,
    pub tally: PreferenceTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTally {
    pub scenario_id: String,
    pub input: String,
    pub tally: PreferenceTally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreInstability {
    pub docs: usize,
    pub scores: ClusterScores,
    pub keywords: KeywordSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIndicators {
    pub model_id: String,
    pub probe_dispersion: Vec<ProbeDispersion>,
    pub anchoring: Vec<ProbeAnova>,
    pub spearman_cap: Indicator<f64>,
    pub industry_anova: Indicator<Anova>,
    pub avg_variance_index: Indicator<f64>,
    pub mean_stddev: Indicator<f64>,
    pub cot_variance_index: Indicator<f64>,
    pub cot_delta: Indicator<f64>,
    pub positive_times: Indicator<usize>,
    pub situational_dependence_pct: Indicator<f64>,
    pub instruct_aversion_pct: Indicator<f64>,
    pub translation_diff_pct: Indicator<f64>,
    pub loss_aversion_pct: Indicator<f64>,
    pub preference_tallies: Vec<TallyRow>,
    pub scenario_tallies: Vec<ScenarioTally>,
    pub score_instability: Indicator<ScoreInstability>,
}

impl ModelIndicators {
    /// Availability per indicator family, in fixed order.
    pub fn families(&self) -> [(&'static str, bool); 8] {
        [
            ("anchoring", self.anchoring.iter().any(|a| a.anova.is_available())),
            ("representativeness", self.spearman_cap.is_available() || self.industry_anova.is_available()),
            ("overconfidence", self.avg_variance_index.is_available()),
            ("limited_attention", self.cot_delta.is_available()),
            ("score_instability", self.score_instability.is_available()),
            ("situational_dependence", self.situational_dependence_pct.is_available()),
            ("loss_aversion", self.loss_aversion_pct.is_available()),
            ("framing", self.translation_diff_pct.is_available() || self.instruct_aversion_pct.is_available()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub config: IndicatorConfig,
    /// Sorted by model id.
    pub models: Vec<ModelIndicators>,
}

/// Label of the (form, language) pair used in preference tables.
pub fn input_label(form: InputForm, language: Language) -> String {
    match (form, language) {
        (InputForm::Direct, Language::Zh) => "direct".into(),
        (InputForm::Instruct, Language::Zh) => "instruct".into(),
        (InputForm::Direct, Language::En) | (InputForm::Translation, _) => "translation".into(),
        (f, l) => format!("{}-{}", f.as_str(), l.as_str()),
    }
}

fn probe_dispersions(m: &ScoreMatrix, model: &str, form: InputForm, est: Estimator) -> Vec<ProbeDispersion> {
    m.probes(model, form)
        .map(|(probe, row)| {
            let xs: Vec<f64> = row.values().map(|&s| f64::from(s)).collect();
            let d = dispersion(&xs, est).ok();
            ProbeDispersion {
                probe_id: probe.to_string(),
                form,
                n: xs.len(),
                mean: xs.iter().sum::<f64>() / xs.len() as f64,
                variance: d.map(|d| d.variance),
                stddev: d.map(|d| d.stddev),
            }
        })
        .collect()
}

/// Mean of the per-probe variances (and stddevs) over the selected probes.
fn variance_index(rows: &[ProbeDispersion], selected: Option<&[String]>) -> (Indicator<f64>, Indicator<f64>) {
    let chosen: Vec<&ProbeDispersion> = rows
        .iter()
        .filter(|r| r.variance.is_some())
        .filter(|r| selected.is_none_or(|s| s.contains(&r.probe_id)))
        .collect();
    if chosen.is_empty() {
        let reason = "no probe scored for at least two companies";
        return (Indicator::na(reason), Indicator::na(reason));
    }
    let k = chosen.len() as f64;
    let var = chosen.iter().filter_map(|r| r.variance).sum::<f64>() / k;
    let sd = chosen.iter().filter_map(|r| r.stddev).sum::<f64>() / k;
    (Indicator::value(var, chosen.len()), Indicator::value(sd, chosen.len()))
}

fn anchoring(m: &ScoreMatrix, model: &str, companies: &BTreeMap<&str, &Company>) -> Vec<ProbeAnova> {
    m.probes(model, InputForm::Direct)
        .map(|(probe, row)| {
            let mut groups: BTreeMap<_, Vec<f64>> = BTreeMap::new();
            for (c, &s) in row {
                if let Some(company) = companies.get(c.as_str()) {
                    groups.entry(company.tier).or_default().push(f64::from(s));
                }
            }
            let n = groups.values().map(Vec::len).sum();
            let anova = if groups.len() < 2 {
                Indicator::na("fewer than two tiers scored")
            } else {
                from_stats(anova_f(&groups.into_values().collect::<Vec<_>>()), n)
            };
            ProbeAnova { probe_id: probe.to_string(), anova }
        })
        .collect()
}

/// Per-company mean direct score across every probe that company saw.
fn company_means<'a>(m: &'a ScoreMatrix, model: &str) -> BTreeMap<&'a str, f64> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for (_, row) in m.probes(model, InputForm::Direct) {
        for (c, &s) in row {
            let e = acc.entry(c.as_str()).or_insert((0.0, 0));
            e.0 += f64::from(s);
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(c, (sum, n))| (c, sum / n as f64)).collect()
}

fn representativeness(
    m: &ScoreMatrix,
    model: &str,
    companies: &BTreeMap<&str, &Company>,
) -> (Indicator<f64>, Indicator<Anova>) {
    let means: Vec<(&Company, f64)> = company_means(m, model)
        .into_iter()
        .filter_map(|(c, x)| companies.get(c).map(|co| (*co, x)))
        .collect();
    let caps: Vec<f64> = means.iter().map(|(c, _)| c.market_cap).collect();
    let scores: Vec<f64> = means.iter().map(|(_, x)| *x).collect();
    let rho = from_stats(spearman(&scores, &caps), means.len());
    let mut by_industry: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (c, x) in &means {
        by_industry.entry(c.industry.as_str()).or_default().push(*x);
    }
    let industry = if by_industry.len() < 2 {
        Indicator::na("fewer than two industries scored")
    } else {
        from_stats(anova_f(&by_industry.into_values().collect::<Vec<_>>()), means.len())
    };
    (rho, industry)
}

fn positive_times(m: &ScoreMatrix, model: &str, probes: &[String]) -> Indicator<usize> {
    if probes.is_empty() {
        return Indicator::na("no probes designated");
    }
    let mut seen = 0;
    let mut positive = 0;
    for p in probes {
        let xs = m.probe_scores(model, InputForm::Direct, p);
        if xs.is_empty() {
            continue;
        }
        seen += 1;
        if xs.iter().map(|(_, s)| s).sum::<f64>() / xs.len() as f64 > 0.0 {
            positive += 1;
        }
    }
    if seen == 0 {
        Indicator::na("designated probes were not scored")
    } else {
        Indicator::value(positive, seen)
    }
}

fn select<'a>(
    choices: &'a [&'a ChoiceRecord],
    form: InputForm,
    language: Language,
    frame: Option<Frame>,
) -> impl Iterator<Item = &'a ChoiceRecord> + 'a {
    choices
        .iter()
        .copied()
        .filter(move |c| c.form == form && c.language == language && frame.is_none_or(|f| c.frame == f))
}

/// Share of gain-framed scenarios whose modal risk class (direct form,
/// Chinese) differs from the pooled modal class.
fn situational_dependence(choices: &[&ChoiceRecord]) -> Indicator<f64> {
    let mut per: BTreeMap<&str, PreferenceTally> = BTreeMap::new();
    let mut pooled = PreferenceTally::default();
    for c in select(choices, InputForm::Direct, Language::Zh, Some(Frame::Gain)) {
        per.entry(c.scenario_id.as_str()).or_default().add(c.risk_class);
        pooled.add(c.risk_class);
    }
    let Some(overall) = pooled.modal_class() else {
        return Indicator::na("no gain-framed direct choices");
    };
    let differing = per.values().filter(|t| t.modal_class() != Some(overall)).count();
    Indicator::value(100.0 * differing as f64 / per.len() as f64, per.len())
}

fn tallies(choices: &[&ChoiceRecord]) -> (Vec<TallyRow>, Vec<ScenarioTally>) {
    let mut rows: BTreeMap<(String, Option<Frame>), PreferenceTally> = BTreeMap::new();
    let mut per: BTreeMap<(String, String), PreferenceTally> = BTreeMap::new();
    for c in choices {
        let label = input_label(c.form, c.language);
        rows.entry((label.clone(), None)).or_default().add(c.risk_class);
        rows.entry((label.clone(), Some(c.frame))).or_default().add(c.risk_class);
        per.entry((c.scenario_id.clone(), label)).or_default().add(c.risk_class);
    }
    (
        rows.into_iter().map(|((input, frame), tally)| TallyRow { input, frame, tally }).collect(),
        per.into_iter()
            .map(|((scenario_id, input), tally)| ScenarioTally { scenario_id, input, tally })
            .collect(),
    )
}

fn pct_indicator(tally: PreferenceTally, f: fn(&PreferenceTally) -> Result<f64, StatsError>) -> Indicator<f64> {
    from_stats(f(&tally), tally.total())
}

pub fn compute_model_indicators(
    model: &str,
    corpus: &Corpus,
    scores: &ScoreMatrix,
    choices: &[&ChoiceRecord],
    cfg: &IndicatorConfig,
) -> ModelIndicators {
    let companies: BTreeMap<&str, &Company> = corpus.companies.iter().map(|c| (c.id.as_str(), c)).collect();
    let direct = probe_dispersions(scores, model, InputForm::Direct, cfg.estimator);
    let cot = probe_dispersions(scores, model, InputForm::Cot, cfg.estimator);
    let selected = cfg.variance_probes.as_deref();
    let (avg_variance_index, mean_stddev) = variance_index(&direct, selected);

    // The COT comparison uses only probes scored in both forms.
    let cot_probes: Vec<String> = cot
        .iter()
        .filter(|r| direct.iter().any(|d| d.probe_id == r.probe_id && d.variance.is_some()))
        .filter(|r| selected.is_none_or(|s| s.contains(&r.probe_id)))
        .map(|r| r.probe_id.clone())
        .collect();
    let (cot_variance_index, _) = variance_index(&cot, Some(&cot_probes));
    let (direct_on_cot, _) = variance_index(&direct, Some(&cot_probes));
    let cot_delta = match (direct_on_cot.get(), cot_variance_index.get()) {
        (Some(&d), Some(&c)) => Indicator::value(cot_delta(d, c), cot_variance_index.n()),
        _ => Indicator::na("no probe scored in both direct and cot forms"),
    };

    let positive_probes: Vec<String> = match &cfg.positive_probes {
        Some(p) => p.clone(),
        None => corpus.news.iter().filter(|n| n.emotion == Emotion::Mixed).map(|n| n.id.clone()).collect(),
    };
    let (spearman_cap, industry_anova) = representativeness(scores, model, &companies);

    let instruct = tally_preferences(select(choices, InputForm::Instruct, Language::Zh, None));
    let loss = tally_preferences(select(choices, InputForm::Direct, Language::Zh, Some(Frame::Loss)));
    let zh: Vec<ChoiceRecord> = select(choices, InputForm::Direct, Language::Zh, None).cloned().collect();
    let en: Vec<ChoiceRecord> = choices
        .iter()
        .filter(|c| c.language == Language::En && matches!(c.form, InputForm::Direct | InputForm::Translation))
        .map(|c| (*c).clone())
        .collect();
    let translation_diff_pct = match framing_diff(&zh, &en) {
        Ok(d) => Indicator::value(d.pct, d.pairs),
        Err(e) => Indicator::na(e.to_string()),
    };
    let (preference_tallies, scenario_tallies) = tallies(choices);

    let mut probe_dispersion = direct;
    probe_dispersion.extend(cot);
    ModelIndicators {
        model_id: model.to_string(),
        anchoring: anchoring(scores, model, &companies),
        spearman_cap,
        industry_anova,
        avg_variance_index,
        mean_stddev,
        cot_variance_index,
        cot_delta,
        positive_times: positive_times(scores, model, &positive_probes),
        situational_dependence_pct: situational_dependence(choices),
        instruct_aversion_pct: pct_indicator(instruct, aversion_pct),
        translation_diff_pct,
        loss_aversion_pct: pct_indicator(loss, loss_aversion_pct),
        preference_tallies,
        scenario_tallies,
        score_instability: Indicator::na("clustering not performed"),
        probe_dispersion,
    }
}

/// Indicators for every model that produced any score or choice.
pub fn compute_bias_report(
    corpus: &Corpus,
    scores: &ScoreMatrix,
    choices: &[ChoiceRecord],
    cfg: &IndicatorConfig,
) -> BiasReport {
    let mut models: BTreeSet<&str> = scores.models();
    models.extend(choices.iter().map(|c| c.model_id.as_str()));
    let models = models
        .into_iter()
        .map(|m| {
            let mine: Vec<&ChoiceRecord> = choices.iter().filter(|c| c.model_id == m).collect();
            compute_model_indicators(m, corpus, scores, &mine, cfg)
        })
        .collect();
    BiasReport { config: cfg.clone(), models }
}
