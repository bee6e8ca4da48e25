//! Prompt rendering for belief probes and risk scenarios, and the
//! deterministic option shuffle.
//!
//! Templates live in `templates/` and are compiled in; bump
//! [`TEMPLATE_VERSION`] whenever their wording changes so cached responses
//! and run manifests stay attributable.

use alloc::format;
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::lottery::{Frame, Language, RiskClass, RiskScenario};
use crate::records::{InputForm, OptionLabel, ProbeKind, ScoreScale};

pub const TEMPLATE_VERSION: &str = "v1";

const EVENT_DIRECT_ZH: &str = include_str!("../templates/event_direct.zh.txt");
const EVENT_COT_ZH: &str = include_str!("../templates/event_cot.zh.txt");
const INTERACTION_DIRECT_ZH: &str = include_str!("../templates/interaction_direct.zh.txt");
const INTERACTION_COT_ZH: &str = include_str!("../templates/interaction_cot.zh.txt");
const PERSONA_ZH: &str = include_str!("../templates/persona.zh.txt");
const PERSONA_EN: &str = include_str!("../templates/persona.en.txt");
const RISK_DIRECT_ZH: &str = include_str!("../templates/risk_direct.zh.txt");
const RISK_COT_ZH: &str = include_str!("../templates/risk_cot.zh.txt");
const RISK_DIRECT_EN: &str = include_str!("../templates/risk_direct.en.txt");
const RISK_COT_EN: &str = include_str!("../templates/risk_cot.en.txt");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("scenario `{scenario}` has no {language} text")]
    MissingTranslation { scenario: String, language: &'static str },
    #[error("input form `{form}` does not apply to {kind} probes")]
    UnsupportedForm { form: &'static str, kind: &'static str },
}

/// Everything about a prompt other than its text. Only `text` feeds the
/// cache key; the metadata travels with the request for logging and for
/// the simulated model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptMeta {
    pub kind: ProbeKind,
    pub form: InputForm,
    pub language: Language,
    pub template_version: String,
    /// Risk classes in presented order (labels A, B, C).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presented: Option<[RiskClass; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Frame>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub text: String,
    pub meta: PromptMeta,
}

fn fill_scale(template: &str, probe: &str, scale: ScoreScale) -> String {
    template
        .replace("{SCALE_MIN}", &scale.min.to_string())
        .replace("{SCALE_MAX}", &scale.max.to_string())
        .replace("{PROBE}", probe)
}

fn persona(lang: Language) -> &'static str {
    match lang {
        Language::Zh => PERSONA_ZH,
        Language::En => PERSONA_EN,
    }
}

/// Question/answer body of an interaction probe.
pub fn interaction_text(question: &str, response: &str) -> String {
    format!("投资者提问：{question}\n公司回答：{response}")
}

/// Render an already subject-substituted news or interaction probe.
pub fn render_event_prompt(
    kind: ProbeKind,
    probe_text: &str,
    form: InputForm,
    scale: ScoreScale,
) -> Result<Prompt, PromptError> {
    let (direct, cot) = match kind {
        ProbeKind::News => (EVENT_DIRECT_ZH, EVENT_COT_ZH),
        ProbeKind::Interaction => (INTERACTION_DIRECT_ZH, INTERACTION_COT_ZH),
        ProbeKind::Risk => {
            return Err(PromptError::UnsupportedForm { form: form.as_str(), kind: "risk" })
        }
    };
    let text = match form {
        InputForm::Direct => fill_scale(direct, probe_text, scale),
        InputForm::Cot => fill_scale(cot, probe_text, scale),
        InputForm::Instruct => {
            let mut t = String::from(persona(Language::Zh));
            t.push_str(&fill_scale(direct, probe_text, scale));
            t
        }
        InputForm::Translation => {
            return Err(PromptError::UnsupportedForm { form: form.as_str(), kind: "belief" })
        }
    };
    Ok(Prompt {
        text,
        meta: PromptMeta {
            kind,
            form,
            language: Language::Zh,
            template_version: TEMPLATE_VERSION.into(),
            presented: None,
            frame: None,
        },
    })
}

/// The six orderings of (averse, neutral, loving), lexicographic.
pub const PERMUTATIONS: [[RiskClass; 3]; 6] = {
    use RiskClass::*;
    [
        [Averse, Neutral, Loving],
        [Averse, Loving, Neutral],
        [Neutral, Averse, Loving],
        [Neutral, Loving, Averse],
        [Loving, Averse, Neutral],
        [Loving, Neutral, Averse],
    ]
};

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Index into [`PERMUTATIONS`]: `(fnv1a64(scenario_id) mod 6 + seed mod 6) mod 6`.
/// Consecutive seeds walk through all six orderings of a scenario.
pub fn permutation_index(scenario_id: &str, seed: u64) -> usize {
    ((fnv1a64(scenario_id.as_bytes()) % 6 + seed % 6) % 6) as usize
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresentedScenario {
    pub scenario_id: String,
    pub seed: u64,
    /// `permutation[i]` is the class shown under label `i` (A, B, C).
    pub permutation: [RiskClass; 3],
}

impl PresentedScenario {
    pub fn class_of(&self, label: OptionLabel) -> RiskClass {
        self.permutation[label.index()]
    }

    pub fn label_of(&self, class: RiskClass) -> OptionLabel {
        let i = self
            .permutation
            .iter()
            .position(|&c| c == class)
            .expect("permutation is a bijection");
        OptionLabel::ALL[i]
    }
}

pub fn shuffle_options(scenario: &RiskScenario, seed: u64) -> PresentedScenario {
    PresentedScenario {
        scenario_id: scenario.id.clone(),
        seed,
        permutation: PERMUTATIONS[permutation_index(&scenario.id, seed)],
    }
}

/// Render a shuffled scenario. `Translation` renders the direct template
/// and is only meaningful with `Language::En`.
pub fn render_risk_prompt(
    scenario: &RiskScenario,
    presented: &PresentedScenario,
    form: InputForm,
    language: Language,
) -> Result<Prompt, PromptError> {
    let missing = || PromptError::MissingTranslation {
        scenario: scenario.id.clone(),
        language: language.as_str(),
    };
    let situation = scenario.prompt.get(language).ok_or_else(missing)?;
    let mut options = String::new();
    for (label, class) in OptionLabel::ALL.iter().zip(presented.permutation) {
        let narrative = scenario
            .option(class)
            .and_then(|o| o.narrative.get(language))
            .ok_or_else(missing)?;
        if !options.is_empty() {
            options.push('\n');
        }
        options.push_str(&format!("{}. {}", label.as_char(), narrative));
    }
    let (direct, cot) = match language {
        Language::Zh => (RISK_DIRECT_ZH, RISK_COT_ZH),
        Language::En => (RISK_DIRECT_EN, RISK_COT_EN),
    };
    let body = |t: &str| t.replace("{SITUATION}", situation).replace("{OPTIONS}", &options);
    let text = match form {
        InputForm::Direct | InputForm::Translation => body(direct),
        InputForm::Cot => body(cot),
        InputForm::Instruct => {
            let mut t = String::from(persona(language));
            t.push_str(&body(direct));
            t
        }
    };
    Ok(Prompt {
        text,
        meta: PromptMeta {
            kind: ProbeKind::Risk,
            form,
            language,
            template_version: TEMPLATE_VERSION.into(),
            presented: Some(presented.permutation),
            frame: Some(scenario.frame),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lottery::{generate_scenario, Frame, Localized, VarianceLadder};
    use alloc::collections::BTreeMap;
    use alloc::vec::Vec;

    fn scenario(id: &str, en: bool) -> RiskScenario {
        let mut s = generate_scenario(
            id,
            "career",
            Localized { zh: "你收到两份工作邀请。".into(), en: Some("You received two job offers.".into()) },
            100.0,
            VarianceLadder::default_for(100.0),
            Frame::Gain,
        )
        .unwrap();
        if !en {
            s.prompt.en = None;
            for o in &mut s.options {
                o.narrative.en = None;
            }
        }
        s
    }

    #[test]
    fn direct_event_prompt_asks_for_score_only() {
        let p = render_event_prompt(ProbeKind::News, "甲公司发布业绩预告", InputForm::Direct, ScoreScale::default()).unwrap();
        assert!(p.text.contains("甲公司发布业绩预告"));
        assert!(p.text.contains("-10 到 10"));
        assert!(p.text.contains("评分："));
        assert!(!p.text.contains("理由"));
    }

    #[test]
    fn cot_event_prompt_asks_for_reasoning_and_score() {
        let p = render_event_prompt(ProbeKind::News, "甲公司发布业绩预告", InputForm::Cot, ScoreScale::default()).unwrap();
        assert!(p.text.contains("理由：") && p.text.contains("评分："));
        assert!(p.text.contains("阐述你的理由"));
    }

    #[test]
    fn instruct_event_prompt_is_persona_plus_direct() {
        let scale = ScoreScale::default();
        let d = render_event_prompt(ProbeKind::Interaction, "q/a", InputForm::Direct, scale).unwrap();
        let i = render_event_prompt(ProbeKind::Interaction, "q/a", InputForm::Instruct, scale).unwrap();
        assert_eq!(i.text, format!("{PERSONA_ZH}{}", d.text));
    }

    #[test]
    fn translation_form_rejected_for_events() {
        assert!(render_event_prompt(ProbeKind::News, "x", InputForm::Translation, ScoreScale::default()).is_err());
    }

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn golden_permutations() {
        // Frozen: changing these breaks replay of cached risk runs.
        let s1 = scenario("s1", true);
        assert_eq!(permutation_index("s1", 0), (fnv1a64(b"s1") % 6) as usize);
        let got: Vec<usize> = (0..6).map(|seed| permutation_index("s1", seed)).collect();
        assert_eq!(got, GOLDEN_S1.to_vec());
        assert_eq!(shuffle_options(&s1, 0).permutation, PERMUTATIONS[GOLDEN_S1[0]]);
    }

    const GOLDEN_S1: [usize; 6] = [1, 2, 3, 4, 5, 0];

    #[test]
    fn six_seeds_cover_six_permutations() {
        let s = scenario("s1", true);
        let mut seen: Vec<_> = (0..6).map(|seed| shuffle_options(&s, seed).permutation).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn shuffle_is_a_bijection() {
        let s = scenario("s-7", true);
        for seed in 0..12 {
            let p = shuffle_options(&s, seed);
            for label in OptionLabel::ALL {
                assert_eq!(p.label_of(p.class_of(label)), label);
            }
        }
    }

    #[test]
    fn permutation_fairness_chi_square() {
        let s = scenario("fair", true);
        let n = 600u64;
        let mut counts = BTreeMap::new();
        for seed in 0..n {
            *counts.entry(shuffle_options(&s, seed).permutation).or_insert(0u64) += 1;
        }
        let expected = n as f64 / 6.0;
        let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert_eq!(counts.len(), 6);
        // 5 degrees of freedom, 99.9th percentile.
        assert!(chi2 < 20.515, "chi2 = {chi2}");
    }

    #[test]
    fn risk_prompt_lists_options_in_permuted_order() {
        let s = scenario("s1", true);
        let p = shuffle_options(&s, 3);
        let zh = render_risk_prompt(&s, &p, InputForm::Direct, Language::Zh).unwrap();
        let en = render_risk_prompt(&s, &p, InputForm::Direct, Language::En).unwrap();
        for (label, class) in OptionLabel::ALL.iter().zip(p.permutation) {
            let zh_line = format!("{}. {}", label.as_char(), s.option(class).unwrap().narrative.zh);
            let en_line = format!("{}. {}", label.as_char(), s.option(class).unwrap().narrative.en.as_ref().unwrap());
            assert!(zh.text.contains(&zh_line));
            assert!(en.text.contains(&en_line));
        }
        assert_eq!(zh.meta.presented, en.meta.presented);
        assert!(en.text.starts_with("You received two job offers."));
    }

    #[test]
    fn instruct_risk_prompt_has_persona() {
        let s = scenario("s1", true);
        let p = shuffle_options(&s, 0);
        let en = render_risk_prompt(&s, &p, InputForm::Instruct, Language::En).unwrap();
        assert!(en.text.starts_with("You are a risk averse person."));
        let zh = render_risk_prompt(&s, &p, InputForm::Instruct, Language::Zh).unwrap();
        assert!(zh.text.starts_with("你是一个风险厌恶的人。"));
    }

    #[test]
    fn missing_translation_is_an_error() {
        let s = scenario("s1", false);
        let p = shuffle_options(&s, 0);
        assert!(render_risk_prompt(&s, &p, InputForm::Direct, Language::Zh).is_ok());
        assert_eq!(
            render_risk_prompt(&s, &p, InputForm::Direct, Language::En),
            Err(PromptError::MissingTranslation { scenario: "s1".into(), language: "en" })
        );
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = scenario("s1", true);
        let a = render_risk_prompt(&s, &shuffle_options(&s, 9), InputForm::Cot, Language::En).unwrap();
        let b = render_risk_prompt(&s, &shuffle_options(&s, 9), InputForm::Cot, Language::En).unwrap();
        assert_eq!(a, b);
    }
}
