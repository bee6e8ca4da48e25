//! Expected-utility arithmetic and construction of the three-option gamble
//! triplets used by the risk-preference scenarios.
//!
//! Every triplet holds the mean fixed and varies only the variance, so the
//! second-order expansion `E[u(x)] ≈ u(E[x]) + ½·u''(E[x])·Var(x)` decides
//! which option a utility maximizer picks: the sure option under a concave
//! utility, the widest spread under a convex one, indifference when linear.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LotteryError {
    #[error("lottery has no outcomes")]
    Empty,
    #[error("outcome {index} has a negative or non-finite probability")]
    BadProbability { index: usize },
    #[error("outcome {index} has a non-finite value")]
    BadValue { index: usize },
    #[error("probabilities sum to {sum}, expected 1")]
    ProbabilitySum { sum: f64 },
    #[error("utility is undefined at {at}")]
    Domain { at: f64 },
    #[error("variances must satisfy 0 < mid < high (got mid={mid}, high={high})")]
    UnorderedVariances { mid: f64, high: f64 },
    #[error("mean must be finite")]
    BadMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub value: f64,
    pub probability: f64,
}

/// A discrete distribution over monetary outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Outcome>", into = "Vec<Outcome>")]
pub struct Lottery {
    outcomes: Vec<Outcome>,
}

impl TryFrom<Vec<Outcome>> for Lottery {
    type Error = LotteryError;

    fn try_from(outcomes: Vec<Outcome>) -> Result<Self, Self::Error> {
        Lottery::new(outcomes)
    }
}

impl From<Lottery> for Vec<Outcome> {
    fn from(l: Lottery) -> Self {
        l.outcomes
    }
}

impl Lottery {
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self, LotteryError> {
        if outcomes.is_empty() {
            return Err(LotteryError::Empty);
        }
        let mut sum = 0.0;
        for (index, o) in outcomes.iter().enumerate() {
            if !o.value.is_finite() {
                return Err(LotteryError::BadValue { index });
            }
            if o.probability.is_nan() || o.probability < 0.0 || !o.probability.is_finite() {
                return Err(LotteryError::BadProbability { index });
            }
            sum += o.probability;
        }
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(LotteryError::ProbabilitySum { sum });
        }
        Ok(Lottery { outcomes })
    }

    pub fn sure(value: f64) -> Result<Self, LotteryError> {
        Lottery::new(alloc::vec![Outcome { value, probability: 1.0 }])
    }

    /// Fifty-fifty gamble between `low` and `high`.
    pub fn coin_flip(low: f64, high: f64) -> Result<Self, LotteryError> {
        Lottery::new(alloc::vec![
            Outcome { value: low, probability: 0.5 },
            Outcome { value: high, probability: 0.5 },
        ])
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|o| o.value * o.probability).sum()
    }

    /// `E[(x - E[x])²]`.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.outcomes
            .iter()
            .map(|o| {
                let d = o.value - m;
                d * d * o.probability
            })
            .sum()
    }

    pub fn min_value(&self) -> f64 {
        self.outcomes.iter().map(|o| o.value).fold(f64::INFINITY, f64::min)
    }

    pub fn negated(&self) -> Lottery {
        Lottery {
            outcomes: self
                .outcomes
                .iter()
                .map(|o| Outcome { value: -o.value, probability: o.probability })
                .collect(),
        }
    }
}

pub fn lottery_variance(lottery: &Lottery) -> f64 {
    lottery.variance()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    Concave,
    Convex,
    Linear,
}

/// The utility battery used to check triplets. Shifts move the domain so
/// that every outcome of a scenario stays where the function is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityModel {
    /// `√(x + shift)`
    Sqrt { shift: f64 },
    /// `ln(x + shift)`
    Log { shift: f64 },
    Linear,
    /// `x²`
    Square,
}

impl UtilityModel {
    pub fn curvature(&self) -> Curvature {
        match self {
            UtilityModel::Sqrt { .. } | UtilityModel::Log { .. } => Curvature::Concave,
            UtilityModel::Linear => Curvature::Linear,
            UtilityModel::Square => Curvature::Convex,
        }
    }

    pub fn name(&self) -> String {
        match self {
            UtilityModel::Sqrt { shift } if *shift == 0.0 => "sqrt(x)".into(),
            UtilityModel::Sqrt { shift } => format!("sqrt(x+{shift})"),
            UtilityModel::Log { shift } => format!("ln(x+{shift})"),
            UtilityModel::Linear => "x".into(),
            UtilityModel::Square => "x^2".into(),
        }
    }

    pub fn value(&self, x: f64) -> Result<f64, LotteryError> {
        let v = match *self {
            UtilityModel::Sqrt { shift } if x + shift >= 0.0 => libm::sqrt(x + shift),
            UtilityModel::Log { shift } if x + shift > 0.0 => libm::log(x + shift),
            UtilityModel::Linear => x,
            UtilityModel::Square => x * x,
            _ => return Err(LotteryError::Domain { at: x }),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(LotteryError::Domain { at: x })
        }
    }

    pub fn second_derivative(&self, x: f64) -> Result<f64, LotteryError> {
        match *self {
            UtilityModel::Sqrt { shift } if x + shift > 0.0 => {
                Ok(-0.25 * libm::pow(x + shift, -1.5))
            }
            UtilityModel::Log { shift } if x + shift > 0.0 => {
                let z = x + shift;
                Ok(-1.0 / (z * z))
            }
            UtilityModel::Linear => Ok(0.0),
            UtilityModel::Square => Ok(2.0),
            _ => Err(LotteryError::Domain { at: x }),
        }
    }

    /// Concave, convex and linear members of the battery, shifted so every
    /// value in `[min_value, ∞)` is in the domain.
    pub fn battery(min_value: f64) -> [UtilityModel; 4] {
        let shift = if min_value < 0.0 { -min_value } else { 0.0 };
        [
            UtilityModel::Sqrt { shift },
            UtilityModel::Log { shift: shift + 1.0 },
            UtilityModel::Linear,
            UtilityModel::Square,
        ]
    }
}

/// `Σ u(x(ω))·p(x(ω))`.
pub fn expected_utility(lottery: &Lottery, u: &UtilityModel) -> Result<f64, LotteryError> {
    lottery
        .outcomes
        .iter()
        .try_fold(0.0, |acc, o| Ok(acc + u.value(o.value)? * o.probability))
}

/// Second-order approximation `u(E[x]) + ½·u''(E[x])·Var(x)`.
pub fn taylor_utility(lottery: &Lottery, u: &UtilityModel) -> Result<f64, LotteryError> {
    let m = lottery.mean();
    Ok(u.value(m)? + 0.5 * u.second_derivative(m)? * lottery.variance())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskClass {
    Averse,
    Neutral,
    Loving,
}

impl RiskClass {
    pub const ALL: [RiskClass; 3] = [RiskClass::Averse, RiskClass::Neutral, RiskClass::Loving];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RiskClass::Averse => "averse",
            RiskClass::Neutral => "neutral",
            RiskClass::Loving => "loving",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Gain,
    Loss,
}

impl Frame {
    pub fn as_str(self) -> &'static str {
        match self {
            Frame::Gain => "gain",
            Frame::Loss => "loss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Language {
    Zh,
    En,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Zh => "zh",
            Language::En => "en",
        }
    }
}

/// Chinese text with an optional corpus-supplied English translation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Localized {
    pub zh: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub en: Option<String>,
}

impl Localized {
    pub fn get(&self, lang: Language) -> Option<&str> {
        match lang {
            Language::Zh => Some(self.zh.as_str()),
            Language::En => self.en.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GambleOption {
    pub risk_class: RiskClass,
    #[serde(rename = "outcomes")]
    pub lottery: Lottery,
    pub narrative: Localized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskScenario {
    pub id: String,
    /// Decision domain, e.g. `career`, `agriculture`, `property`, `sport`.
    pub context: String,
    pub frame: Frame,
    /// The situation text shown before the options.
    pub prompt: Localized,
    pub options: Vec<GambleOption>,
}

impl RiskScenario {
    /// Option carrying `class`, if present.
    pub fn option(&self, class: RiskClass) -> Option<&GambleOption> {
        self.options.iter().find(|o| o.risk_class == class)
    }

    pub fn has_language(&self, lang: Language) -> bool {
        self.prompt.get(lang).is_some() && self.options.iter().all(|o| o.narrative.get(lang).is_some())
    }

    pub fn min_value(&self) -> f64 {
        self.options
            .iter()
            .map(|o| o.lottery.min_value())
            .fold(f64::INFINITY, f64::min)
    }

    /// Broken invariants as `(field, message)` pairs.
    pub fn validate(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        fn push(out: &mut Vec<(String, String)>, field: &str, msg: String) {
            out.push((field.to_string(), msg));
        }
        if self.options.len() != 3 {
            push(&mut out, "options", format!("expected 3 options, found {}", self.options.len()));
            return out;
        }
        for class in RiskClass::ALL {
            let n = self.options.iter().filter(|o| o.risk_class == class).count();
            if n != 1 {
                push(&mut out, "options", format!("risk class `{}` appears {n} times", class.as_str()));
            }
        }
        if !out.is_empty() {
            return out;
        }
        let mean = self.options[0].lottery.mean();
        let tol = PROB_TOLERANCE * mean.abs().max(1.0);
        if self.options.iter().any(|o| (o.lottery.mean() - mean).abs() > tol) {
            push(&mut out, "options", "option lotteries do not share a common mean".into());
        }
        let var = |c| self.option(c).map(|o| o.lottery.variance()).unwrap_or(f64::NAN);
        let (va, vn, vl) = (var(RiskClass::Averse), var(RiskClass::Neutral), var(RiskClass::Loving));
        if !(va < vn && vn < vl) {
            push(
                &mut out,
                "options",
                format!("variances must be ordered averse < neutral < loving (got {va}, {vn}, {vl})"),
            );
        }
        if self.prompt.zh.trim().is_empty() {
            push(&mut out, "prompt", "empty zh situation text".into());
        }
        let with_en = self.options.iter().filter(|o| o.narrative.en.is_some()).count()
            + usize::from(self.prompt.en.is_some());
        if with_en != 0 && with_en != 4 {
            push(&mut out, "narrative", "English translation must cover the prompt and all three options".into());
        }
        for o in &self.options {
            if o.narrative.zh.trim().is_empty() {
                push(&mut out, "narrative", format!("empty zh narrative for `{}` option", o.risk_class.as_str()));
            }
        }
        out
    }
}

/// Variance levels for the neutral and loving options (the averse option
/// is always the sure amount).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceLadder {
    pub mid: f64,
    pub high: f64,
}

impl VarianceLadder {
    /// `mid = (mean/2)²`, `high = mean²`.
    pub fn default_for(mean: f64) -> Self {
        let half = 0.5 * mean;
        VarianceLadder { mid: half * half, high: mean * mean }
    }
}

fn money(x: f64) -> String {
    if x == libm::trunc(x) && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:.2}")
    }
}

/// Plain-language description of a lottery's outcomes in the given frame.
/// Values are shown as magnitudes; the frame supplies the direction.
pub fn narrate(lottery: &Lottery, frame: Frame, lang: Language) -> String {
    let verb = match (frame, lang) {
        (Frame::Gain, Language::Zh) => "获得",
        (Frame::Loss, Language::Zh) => "损失",
        (Frame::Gain, Language::En) => "gain",
        (Frame::Loss, Language::En) => "lose",
    };
    let outcomes = lottery.outcomes();
    if let [only] = outcomes {
        return match lang {
            Language::Zh => format!("确定{verb}{}元", money(only.value.abs())),
            Language::En => format!("{verb} {} for certain", money(only.value.abs())),
        };
    }
    let parts: Vec<String> = outcomes
        .iter()
        .map(|o| {
            let pct = money(o.probability * 100.0);
            match lang {
                Language::Zh => format!("{pct}%的概率{verb}{}元", money(o.value.abs())),
                Language::En => format!("a {pct}% chance to {verb} {}", money(o.value.abs())),
            }
        })
        .collect();
    match lang {
        Language::Zh => parts.join("，"),
        Language::En => parts.join(" and "),
    }
}

/// Build the averse / neutral / loving options for one scenario: a sure
/// `mean`, and two fifty-fifty gambles at `mean ± √mid` and `mean ± √high`.
/// In the loss frame every outcome is negated.
pub fn build_option_triplet(
    mean: f64,
    ladder: VarianceLadder,
    frame: Frame,
) -> Result<[GambleOption; 3], LotteryError> {
    if !mean.is_finite() {
        return Err(LotteryError::BadMean);
    }
    let VarianceLadder { mid, high } = ladder;
    if !(0.0 < mid && mid < high) || !high.is_finite() {
        return Err(LotteryError::UnorderedVariances { mid, high });
    }
    let sign = match frame {
        Frame::Gain => 1.0,
        Frame::Loss => -1.0,
    };
    let spread = |v: f64| {
        let d = libm::sqrt(v);
        // `+ 0.0` normalizes a negated zero outcome to +0.
        Lottery::coin_flip(sign * (mean - d) + 0.0, sign * (mean + d) + 0.0)
    };
    let make = |risk_class, lottery: Lottery| GambleOption {
        narrative: Localized {
            zh: narrate(&lottery, frame, Language::Zh),
            en: Some(narrate(&lottery, frame, Language::En)),
        },
        risk_class,
        lottery,
    };
    Ok([
        make(RiskClass::Averse, Lottery::sure(sign * mean)?),
        make(RiskClass::Neutral, spread(mid)?),
        make(RiskClass::Loving, spread(high)?),
    ])
}

/// Assemble a full scenario record around a generated triplet.
pub fn generate_scenario(
    id: &str,
    context: &str,
    prompt: Localized,
    mean: f64,
    ladder: VarianceLadder,
    frame: Frame,
) -> Result<RiskScenario, LotteryError> {
    Ok(RiskScenario {
        id: id.to_string(),
        context: context.to_string(),
        frame,
        prompt,
        options: build_option_triplet(mean, ladder, frame)?.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripletCheck {
    pub utility: String,
    pub curvature: Curvature,
    /// Expected utility of the averse, neutral and loving options.
    pub utilities: [f64; 3],
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripletReport {
    pub scenario_id: String,
    pub checks: Vec<TripletCheck>,
}

impl TripletReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn argmax(values: &[f64; 3]) -> usize {
    let mut best = 0;
    for i in 1..3 {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// Check that each utility picks the option its curvature predicts.
/// Failures are reported in the returned checks, never raised.
pub fn verify_triplet(
    scenario: &RiskScenario,
    concave: &UtilityModel,
    convex: &UtilityModel,
    linear: &UtilityModel,
) -> TripletReport {
    let mut checks = Vec::new();
    for (u, expect) in [(concave, Curvature::Concave), (convex, Curvature::Convex), (linear, Curvature::Linear)] {
        let mut utilities = [f64::NAN; 3];
        let mut error = None;
        for class in RiskClass::ALL {
            match scenario.option(class).map(|o| expected_utility(&o.lottery, u)) {
                Some(Ok(v)) => utilities[class.index()] = v,
                Some(Err(e)) => error = Some(e.to_string()),
                None => error = Some(format!("missing `{}` option", class.as_str())),
            }
        }
        let (passed, detail) = if let Some(e) = error {
            (false, e)
        } else if u.curvature() != expect {
            (false, format!("{} is not {:?}", u.name(), expect))
        } else {
            match expect {
                Curvature::Concave => {
                    let ok = argmax(&utilities) == RiskClass::Averse.index();
                    (ok, format!("argmax should be averse under {}", u.name()))
                }
                Curvature::Convex => {
                    let ok = argmax(&utilities) == RiskClass::Loving.index();
                    (ok, format!("argmax should be loving under {}", u.name()))
                }
                Curvature::Linear => {
                    let tol = 1e-9 * utilities[0].abs().max(1.0);
                    let ok = (utilities[0] - utilities[1]).abs() <= tol
                        && (utilities[0] - utilities[2]).abs() <= tol;
                    (ok, format!("expected utilities should coincide under {}", u.name()))
                }
            }
        };
        checks.push(TripletCheck {
            utility: u.name(),
            curvature: expect,
            utilities,
            passed,
            detail,
        });
    }
    TripletReport { scenario_id: scenario.id.clone(), checks }
}
