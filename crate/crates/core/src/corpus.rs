//! Probe data model: event news, investor interactions, the company
//! universe, and the checks every record must pass before a run.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::lottery::RiskScenario;
use crate::taxonomy::EventType;

/// Token replaced by the company pseudonym during subject substitution.
pub const COMPANY_PLACEHOLDER: &str = "{COMPANY}";
/// Token replaced by the company's industry label.
pub const INDUSTRY_PLACEHOLDER: &str = "{INDUSTRY}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Positive,
    Negative,
    Mixed,
    Neutral,
}

impl Emotion {
    pub fn is_emotional(self) -> bool {
        self != Emotion::Neutral
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventNews {
    pub id: String,
    pub event_type: EventType,
    pub body: String,
    pub emotion: Emotion,
    pub numbers_abstracted: bool,
}

fn neutral() -> Emotion {
    Emotion::Neutral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub id: String,
    pub question: String,
    pub response: String,
    #[serde(default = "neutral")]
    pub emotion: Emotion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Top,
    Middle,
    Bottom,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Top, Tier::Middle, Tier::Bottom];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Top => "top",
            Tier::Middle => "middle",
            Tier::Bottom => "bottom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Company {
    pub id: String,
    pub display_name: String,
    pub pseudonym: String,
    /// First-level industry label (already anonymized by the corpus author).
    pub industry: String,
    pub market_cap: f64,
    pub tier: Tier,
    #[serde(default)]
    pub st_flag: bool,
}

/// The full probe dataset for a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub version: String,
    pub news: Vec<EventNews>,
    pub interactions: Vec<Interaction>,
    pub companies: Vec<Company>,
    pub scenarios: Vec<RiskScenario>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    News,
    Interaction,
    Company,
    Scenario,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::News => "news",
            RecordKind::Interaction => "interactions",
            RecordKind::Company => "companies",
            RecordKind::Scenario => "scenarios",
        }
    }
}

/// One broken invariant, pinned to the record and field that broke it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub kind: RecordKind,
    pub record_id: String,
    pub field: String,
    pub message: String,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "{} record `{}` field `{}`: {}",
            self.kind.as_str(),
            self.record_id,
            self.field,
            self.message
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("template has no `{COMPANY_PLACEHOLDER}` placeholder")]
    NoPlaceholder,
    #[error("universe has {available} eligible companies, need at least {needed}")]
    InsufficientUniverse { needed: usize, available: usize },
    #[error("duplicate company id `{0}`")]
    DuplicateId(String),
}

/// Replace every subject placeholder in `template` with the company's
/// pseudonym (and industry placeholders with its industry label).
pub fn substitute_subject(template: &str, company: &Company) -> Result<String, CorpusError> {
    if !template.contains(COMPANY_PLACEHOLDER) {
        return Err(CorpusError::NoPlaceholder);
    }
    Ok(template
        .replace(COMPANY_PLACEHOLDER, &company.pseudonym)
        .replace(INDUSTRY_PLACEHOLDER, &company.industry))
}

/// Companies drawn from the three market-cap strata, each sorted by
/// descending market cap.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanySet {
    pub top: Vec<Company>,
    pub middle: Vec<Company>,
    pub bottom: Vec<Company>,
}

impl CompanySet {
    pub fn tier(&self, tier: Tier) -> &[Company] {
        match tier {
            Tier::Top => &self.top,
            Tier::Middle => &self.middle,
            Tier::Bottom => &self.bottom,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Company> {
        self.top.iter().chain(&self.middle).chain(&self.bottom)
    }

    pub fn len(&self) -> usize {
        self.top.len() + self.middle.len() + self.bottom.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn by_cap_desc(a: &Company, b: &Company) -> Ordering {
    b.market_cap
        .partial_cmp(&a.market_cap)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.id.cmp(&b.id))
}

/// Draw `per_tier` companies from the top, middle and bottom of the
/// market-cap ranking. ST companies are never eligible. The middle tier is
/// the `per_tier` window centered on the median rank; ties in market cap are
/// broken by id.
pub fn stratify_companies(universe: &[Company], per_tier: usize) -> Result<CompanySet, CorpusError> {
    let mut seen = BTreeSet::new();
    for c in universe {
        if !seen.insert(c.id.as_str()) {
            return Err(CorpusError::DuplicateId(c.id.clone()));
        }
    }
    let mut ranked: Vec<Company> = universe.iter().filter(|c| !c.st_flag).cloned().collect();
    let needed = per_tier * 3;
    if per_tier == 0 || ranked.len() < needed {
        return Err(CorpusError::InsufficientUniverse {
            needed: needed.max(3),
            available: ranked.len(),
        });
    }
    ranked.sort_by(by_cap_desc);
    let n = ranked.len();
    let mid_start = (n - per_tier) / 2;
    let take = |range: core::ops::Range<usize>, tier: Tier| -> Vec<Company> {
        ranked[range]
            .iter()
            .cloned()
            .map(|mut c| {
                c.tier = tier;
                c
            })
            .collect()
    };
    Ok(CompanySet {
        top: take(0..per_tier, Tier::Top),
        middle: take(mid_start..mid_start + per_tier, Tier::Middle),
        bottom: take(n - per_tier..n, Tier::Bottom),
    })
}

fn violation(kind: RecordKind, id: &str, field: &str, message: impl Into<String>) -> Violation {
    Violation {
        kind,
        record_id: id.to_string(),
        field: field.to_string(),
        message: message.into(),
    }
}

pub fn validate_news(news: &EventNews) -> Vec<Violation> {
    let mut out = Vec::new();
    if news.id.is_empty() {
        out.push(violation(RecordKind::News, "", "id", "empty id"));
    }
    if !news.body.contains(COMPANY_PLACEHOLDER) {
        out.push(violation(
            RecordKind::News,
            &news.id,
            "body",
            format!("missing subject placeholder {COMPANY_PLACEHOLDER}"),
        ));
    }
    if !news.numbers_abstracted {
        out.push(violation(
            RecordKind::News,
            &news.id,
            "numbers_abstracted",
            "numerical details must be abstracted to proportional figures before a run",
        ));
    }
    out
}

pub fn validate_interaction(item: &Interaction) -> Vec<Violation> {
    let mut out = Vec::new();
    if item.id.is_empty() {
        out.push(violation(RecordKind::Interaction, "", "id", "empty id"));
    }
    for (field, text) in [("question", &item.question), ("response", &item.response)] {
        if !text.contains(COMPANY_PLACEHOLDER) {
            out.push(violation(
                RecordKind::Interaction,
                &item.id,
                field,
                format!("missing subject placeholder {COMPANY_PLACEHOLDER}"),
            ));
        }
    }
    if item.emotion != Emotion::Neutral {
        out.push(violation(
            RecordKind::Interaction,
            &item.id,
            "emotion",
            "interactions must be emotionally neutral",
        ));
    }
    out
}

pub fn validate_company(c: &Company) -> Vec<Violation> {
    let mut out = Vec::new();
    if c.id.is_empty() {
        out.push(violation(RecordKind::Company, "", "id", "empty id"));
    }
    if c.market_cap.partial_cmp(&0.0) != Some(core::cmp::Ordering::Greater) || !c.market_cap.is_finite() {
        out.push(violation(
            RecordKind::Company,
            &c.id,
            "market_cap",
            "market cap must be a positive finite number",
        ));
    }
    if c.st_flag {
        out.push(violation(
            RecordKind::Company,
            &c.id,
            "st_flag",
            "ST (delisting-risk) companies are excluded from the universe",
        ));
    }
    if c.pseudonym.is_empty() || c.pseudonym == c.display_name {
        out.push(violation(
            RecordKind::Company,
            &c.id,
            "pseudonym",
            "pseudonym must be non-empty and differ from the display name",
        ));
    }
    out
}

/// Tiers must agree with the market-cap ranking: every top company is at
/// least as large as every middle company, and so on down.
fn validate_tier_order(companies: &[Company]) -> Vec<Violation> {
    let mut out = Vec::new();
    let range = |tier: Tier| {
        companies
            .iter()
            .filter(|c| c.tier == tier)
            .map(|c| c.market_cap)
            .fold(None, |acc: Option<(f64, f64)>, cap| match acc {
                None => Some((cap, cap)),
                Some((lo, hi)) => Some((lo.min(cap), hi.max(cap))),
            })
    };
    let pairs = [(Tier::Top, Tier::Middle), (Tier::Middle, Tier::Bottom), (Tier::Top, Tier::Bottom)];
    for (upper, lower) in pairs {
        if let (Some((upper_min, _)), Some((_, lower_max))) = (range(upper), range(lower)) {
            if upper_min < lower_max {
                for c in companies.iter().filter(|c| c.tier == lower && c.market_cap > upper_min) {
                    out.push(violation(
                        RecordKind::Company,
                        &c.id,
                        "tier",
                        format!(
                            "{} company is larger than the smallest {} company",
                            lower.as_str(),
                            upper.as_str()
                        ),
                    ));
                }
            }
        }
    }
    out
}

fn duplicates<'a>(kind: RecordKind, ids: impl Iterator<Item = &'a str>) -> Vec<Violation> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for id in ids {
        if !seen.insert(id) {
            out.push(violation(kind, id, "id", "duplicate id"));
        }
    }
    out
}

impl Corpus {
    /// Every invariant violation in the corpus, in a stable order.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        out.extend(duplicates(RecordKind::News, self.news.iter().map(|n| n.id.as_str())));
        out.extend(duplicates(
            RecordKind::Interaction,
            self.interactions.iter().map(|n| n.id.as_str()),
        ));
        out.extend(duplicates(
            RecordKind::Company,
            self.companies.iter().map(|n| n.id.as_str()),
        ));
        out.extend(duplicates(
            RecordKind::Scenario,
            self.scenarios.iter().map(|n| n.id.as_str()),
        ));
        out.extend(self.news.iter().flat_map(validate_news));
        out.extend(self.interactions.iter().flat_map(validate_interaction));
        out.extend(self.companies.iter().flat_map(validate_company));
        out.extend(validate_tier_order(&self.companies));
        for s in &self.scenarios {
            out.extend(s.validate().into_iter().map(|(field, message)| Violation {
                kind: RecordKind::Scenario,
                record_id: s.id.clone(),
                field,
                message,
            }));
        }
        out
    }

    pub fn company(&self, id: &str) -> Option<&Company> {
        self.companies.iter().find(|c| c.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    pub(crate) fn company(id: &str, cap: f64) -> Company {
        Company {
            id: id.into(),
            display_name: format!("Display {id}"),
            pseudonym: format!("P{id}"),
            industry: "steel".into(),
            market_cap: cap,
            tier: Tier::Middle,
            st_flag: false,
        }
    }

    #[test]
    fn substitutes_single_placeholder() {
        let mut c = company("c1", 1.0);
        c.pseudonym = "甲公司".into();
        assert_eq!(substitute_subject("{COMPANY} 发布业绩预告", &c).unwrap(), "甲公司 发布业绩预告");
    }

    #[test]
    fn substitutes_every_placeholder() {
        let c = company("x", 1.0);
        let out = substitute_subject("{COMPANY} and {COMPANY} in {INDUSTRY}", &c).unwrap();
        assert_eq!(out, "Px and Px in steel");
    }

    #[test]
    fn substitution_requires_placeholder() {
        let c = company("x", 1.0);
        assert_eq!(substitute_subject("no subject here", &c), Err(CorpusError::NoPlaceholder));
    }

    #[test]
    fn stratifies_six_companies() {
        let caps = [600.0, 500.0, 400.0, 300.0, 200.0, 100.0];
        let universe: Vec<_> = caps
            .iter()
            .enumerate()
            .map(|(i, &cap)| company(&format!("c{i}"), cap))
            .collect();
        let set = stratify_companies(&universe, 2).unwrap();
        let caps_of = |t: Tier| set.tier(t).iter().map(|c| c.market_cap).collect::<Vec<_>>();
        assert_eq!(caps_of(Tier::Top), vec![600.0, 500.0]);
        assert_eq!(caps_of(Tier::Middle), vec![400.0, 300.0]);
        assert_eq!(caps_of(Tier::Bottom), vec![200.0, 100.0]);
        assert!(set.middle.iter().all(|c| c.tier == Tier::Middle));
    }

    #[test]
    fn stratifies_six_hundred_into_disjoint_tiers() {
        let universe: Vec<_> = (0..600)
            .map(|i| company(&format!("c{i:03}"), 1.0 + i as f64))
            .collect();
        let set = stratify_companies(&universe, 200).unwrap();
        let ids: BTreeSet<_> = set.iter().map(|c| c.id.clone()).collect();
        assert_eq!(ids.len(), 600);
        for t in Tier::ALL {
            assert_eq!(set.tier(t).len(), 200);
        }
    }

    #[test]
    fn stratification_rejects_small_universe() {
        let universe: Vec<_> = (0..5).map(|i| company(&format!("c{i}"), 1.0 + i as f64)).collect();
        assert_eq!(
            stratify_companies(&universe, 2),
            Err(CorpusError::InsufficientUniverse { needed: 6, available: 5 })
        );
    }

    #[test]
    fn stratification_skips_st_and_breaks_ties_by_id() {
        let mut universe: Vec<_> = ["b", "a", "c", "d", "e", "f", "g"]
            .iter()
            .map(|id| company(id, 100.0))
            .collect();
        universe[6].st_flag = true;
        let set = stratify_companies(&universe, 2).unwrap();
        let ids = |t: Tier| set.tier(t).iter().map(|c| c.id.as_str()).collect::<Vec<_>>();
        assert_eq!(ids(Tier::Top), vec!["a", "b"]);
        assert_eq!(ids(Tier::Middle), vec!["c", "d"]);
        assert_eq!(ids(Tier::Bottom), vec!["e", "f"]);
    }

    #[test]
    fn validation_flags_st_and_tier_disorder() {
        let mut big = company("big", 1000.0);
        big.tier = Tier::Bottom;
        let mut small = company("small", 1.0);
        small.tier = Tier::Top;
        small.st_flag = true;
        let corpus = Corpus {
            companies: vec![big, small],
            ..Corpus::default()
        };
        let v = corpus.validate();
        assert!(v.iter().any(|v| v.field == "st_flag" && v.record_id == "small"));
        assert!(v.iter().any(|v| v.field == "tier" && v.record_id == "big"));
    }

    #[test]
    fn validation_names_news_missing_placeholder() {
        let news = EventNews {
            id: "n9".into(),
            event_type: EventType::BuyBack,
            body: "某公司回购股份".into(),
            emotion: Emotion::Positive,
            numbers_abstracted: true,
        };
        let v = validate_news(&news);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].record_id, "n9");
        assert_eq!(v[0].field, "body");
    }

    proptest! {
        #[test]
        fn substitution_length_law(
            prefix in "[a-z 发布]{0,8}",
            pieces in proptest::collection::vec("[a-z 。，]{0,6}", 1..5),
            pseudonym in "[甲乙丙A-Z]{1,6}",
        ) {
            let mut template = prefix.clone();
            for p in &pieces {
                template.push_str(COMPANY_PLACEHOLDER);
                template.push_str(p);
            }
            let mut c = company("z", 1.0);
            c.pseudonym = pseudonym.clone();
            let out = substitute_subject(&template, &c).unwrap();
            let k = pieces.len();
            prop_assert_eq!(
                out.len(),
                template.len() - k * COMPANY_PLACEHOLDER.len() + k * pseudonym.len()
            );
            prop_assert!(!out.contains(COMPANY_PLACEHOLDER));
        }

        #[test]
        fn stratification_is_a_partition(
            caps in proptest::collection::vec(1u32..50, 3..40),
            per_tier_seed in 1usize..20,
        ) {
            let universe: Vec<_> = caps
                .iter()
                .enumerate()
                .map(|(i, &cap)| company(&format!("c{i:02}"), cap as f64))
                .collect();
            let per_tier = 1 + per_tier_seed % (universe.len() / 3);
            let set = stratify_companies(&universe, per_tier).unwrap();
            let ids: BTreeSet<_> = set.iter().map(|c| c.id.clone()).collect();
            prop_assert_eq!(ids.len(), 3 * per_tier);
            for t in Tier::ALL {
                prop_assert_eq!(set.tier(t).len(), per_tier);
            }
            let min_top = set.top.iter().map(|c| c.market_cap).fold(f64::INFINITY, f64::min);
            let max_mid = set.middle.iter().map(|c| c.market_cap).fold(0.0, f64::max);
            let min_mid = set.middle.iter().map(|c| c.market_cap).fold(f64::INFINITY, f64::min);
            let max_bot = set.bottom.iter().map(|c| c.market_cap).fold(0.0, f64::max);
            prop_assert!(min_top >= max_mid && min_mid >= max_bot);
        }
    }
}
