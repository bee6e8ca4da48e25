//! Deterministic stand-in for a chat model and an embedding model.
//!
//! Every reply is a pure function of (model id, prompt text, salt) and the
//! behaviour script, so runs against the mock are reproducible bit for bit.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use finbias_core::lottery::{Frame, Language, RiskClass};
use finbias_core::prompting::{fnv1a64, Prompt};
use finbias_core::records::{OptionLabel, ProbeKind};
use finbias_core::topics::tokenize;
use finbias_core::{InputForm, ScoreScale};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeliefScript {
    /// Mean score before term adjustments.
    pub base: f64,
    /// Added to the mean whenever the prompt contains the key.
    pub terms: BTreeMap<String, f64>,
    /// Integer half-width of the uniform noise in direct and instruct form.
    pub noise: i32,
    pub cot_noise: i32,
    /// Added to the mean in cot form.
    pub cot_shift: f64,
    pub scale: ScoreScale,
}

impl Default for BeliefScript {
    fn default() -> Self {
        BeliefScript {
            base: 0.0,
            terms: BTreeMap::new(),
            noise: 2,
            cot_noise: 1,
            cot_shift: 0.0,
            scale: ScoreScale::default(),
        }
    }
}

/// Choice weights over (averse, neutral, loving). Later overrides win:
/// English, then loss frame, then instruct or cot form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskScript {
    pub weights: [f64; 3],
    pub en: Option<[f64; 3]>,
    pub loss: Option<[f64; 3]>,
    pub instruct: Option<[f64; 3]>,
    pub cot: Option<[f64; 3]>,
}

impl Default for RiskScript {
    fn default() -> Self {
        RiskScript { weights: [0.6, 0.25, 0.15], en: None, loss: None, instruct: None, cot: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultScript {
    /// Probability of a reply with no score or label.
    pub unparseable_rate: f64,
    /// Probability of a score outside the scale (scored probes only).
    pub out_of_range_rate: f64,
    /// Prompts containing any of these fail at the transport level.
    pub fail_substrings: Vec<String>,
    /// Upper bound of a uniform per-call delay.
    pub max_delay_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub contains: String,
    pub reply: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub belief: BeliefScript,
    pub risk: RiskScript,
    pub faults: FaultScript,
    /// Verbatim replies; the first rule whose substring occurs wins.
    pub rules: Vec<Rule>,
}

#[derive(Debug, thiserror::Error)]
pub enum MockError {
    #[error("cannot read mock script {path}: {message}")]
    Script { path: String, message: String },
    #[error("scripted transport failure")]
    Transport,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, MockError> {
        let err = |message: String| MockError::Script { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        toml::from_str(&text).map_err(|e| err(e.to_string()))
    }
}

const POSITIVE: [&str; 6] = [
    "盈利能力有望改善",
    "回购彰显管理层信心",
    "订单增长支撑业绩",
    "市场情绪偏向乐观",
    "现金流状况稳健",
    "行业景气度回升",
];
const NEGATIVE: [&str; 6] = [
    "减持带来抛售压力",
    "亏损可能继续扩大",
    "监管风险不容忽视",
    "市场情绪趋于谨慎",
    "债务负担较重",
    "业绩不确定性上升",
];
const NEUTRAL: [&str; 4] = ["影响有限", "基本面变化不大", "需要持续观察后续进展", "多空因素相互抵消"];

pub struct MockModel {
    model_id: String,
    script: MockScript,
}

fn pick<'a>(rng: &mut ChaCha8Rng, bank: &[&'a str]) -> &'a str {
    bank[rng.random_range(0..bank.len())]
}

/// First line of the probe body, which names the subject company.
fn probe_line(text: &str) -> String {
    let line = text
        .lines()
        .find(|l| l.starts_with("新闻：") || l.starts_with("投资者提问："))
        .unwrap_or("");
    let body = line.split_once('：').map(|(_, b)| b).unwrap_or("");
    body.chars().take(24).collect()
}

impl MockModel {
    pub fn new(model_id: &str, script: MockScript) -> Self {
        MockModel { model_id: model_id.into(), script }
    }

    fn rng(&self, prompt: &str, salt: u64) -> ChaCha8Rng {
        let mut key = Vec::with_capacity(self.model_id.len() + prompt.len() + 9);
        key.extend_from_slice(self.model_id.as_bytes());
        key.push(0);
        key.extend_from_slice(prompt.as_bytes());
        key.extend_from_slice(&salt.to_le_bytes());
        ChaCha8Rng::seed_from_u64(fnv1a64(&key))
    }

    pub fn complete(&self, prompt: &Prompt, salt: u64) -> Result<String, MockError> {
        let mut rng = self.rng(&prompt.text, salt);
        let faults = &self.script.faults;
        if faults.max_delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(rng.random_range(0..=faults.max_delay_ms)));
        }
        if faults.fail_substrings.iter().any(|s| prompt.text.contains(s.as_str())) {
            return Err(MockError::Transport);
        }
        if let Some(rule) = self.script.rules.iter().find(|r| prompt.text.contains(r.contains.as_str())) {
            return Ok(rule.reply.clone());
        }
        let lang = prompt.meta.language;
        let u: f64 = rng.random();
        if u < faults.unparseable_rate {
            return Ok(match lang {
                Language::Zh => "这个问题很难判断，需要更多信息。".into(),
                Language::En => "It depends on the circumstances.".into(),
            });
        }
        let risky = prompt.meta.kind == ProbeKind::Risk;
        if !risky && u < faults.unparseable_rate + faults.out_of_range_rate {
            let s = self.script.belief.scale;
            return Ok(format!("评分：{}", s.max + 5 + (s.max - s.min)));
        }
        if risky {
            Ok(self.choose(prompt, &mut rng))
        } else {
            Ok(self.score(prompt, &mut rng))
        }
    }

    fn score(&self, prompt: &Prompt, rng: &mut ChaCha8Rng) -> String {
        let b = &self.script.belief;
        let cot = prompt.meta.form == InputForm::Cot;
        let mut mean = b.base + if cot { b.cot_shift } else { 0.0 };
        for (term, shift) in &b.terms {
            if prompt.text.contains(term.as_str()) {
                mean += shift;
            }
        }
        let noise = if cot { b.cot_noise } else { b.noise }.max(0);
        let raw = mean.round() as i64 + i64::from(rng.random_range(-noise..=noise));
        let s = raw.clamp(i64::from(b.scale.min), i64::from(b.scale.max));
        if !cot {
            return format!("评分：{s}");
        }
        let bank: &[&str] = match s.signum() {
            1 => &POSITIVE,
            -1 => &NEGATIVE,
            _ => &NEUTRAL,
        };
        let (a, c) = (pick(rng, bank), pick(rng, bank));
        format!("理由：{}。{a}，{c}。\n评分：{s}", probe_line(&prompt.text))
    }

    fn weights(&self, prompt: &Prompt) -> [f64; 3] {
        let r = &self.script.risk;
        let mut w = r.weights;
        if prompt.meta.language == Language::En {
            w = r.en.unwrap_or(w);
        }
        if prompt.meta.frame == Some(Frame::Loss) {
            w = r.loss.unwrap_or(w);
        }
        match prompt.meta.form {
            InputForm::Instruct => r.instruct.unwrap_or(w),
            InputForm::Cot => r.cot.unwrap_or(w),
            _ => w,
        }
    }

    fn choose(&self, prompt: &Prompt, rng: &mut ChaCha8Rng) -> String {
        let w = self.weights(prompt);
        let total: f64 = w.iter().map(|x| x.max(0.0)).sum();
        let mut target = rng.random::<f64>() * total;
        let mut class = RiskClass::Loving;
        for c in RiskClass::ALL {
            let wc = w[c.index()].max(0.0);
            if target < wc {
                class = c;
                break;
            }
            target -= wc;
        }
        let presented = prompt.meta.presented.unwrap_or(RiskClass::ALL);
        let i = presented.iter().position(|&c| c == class).unwrap_or(0);
        let label = OptionLabel::ALL[i].as_char();
        let cot = prompt.meta.form == InputForm::Cot;
        match (prompt.meta.language, cot) {
            (Language::Zh, false) => format!("选择：{label}"),
            (Language::En, false) => format!("Answer: {label}"),
            (Language::Zh, true) => format!("理由：综合考虑收益与风险，我更偏好{}。\n选择：{label}", zh_reason(class)),
            (Language::En, true) => {
                format!("Reasoning: weighing return against risk, I prefer {}.\nAnswer: {label}", en_reason(class))
            }
        }
    }
}

fn zh_reason(c: RiskClass) -> &'static str {
    match c {
        RiskClass::Averse => "确定的结果",
        RiskClass::Neutral => "适度的波动",
        RiskClass::Loving => "更高的潜在收益",
    }
}

fn en_reason(c: RiskClass) -> &'static str {
    match c {
        RiskClass::Averse => "the certain outcome",
        RiskClass::Neutral => "moderate variability",
        RiskClass::Loving => "the higher potential payoff",
    }
}

/// Feature-hashing embedder over the shared tokenizer: each token adds a
/// signed unit to one bucket; vectors are L2-normalized.
pub fn mock_embed(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for token in tokenize(text) {
        let h = fnv1a64(token.as_bytes());
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}
