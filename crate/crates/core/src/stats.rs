//! Dispersion, one-way ANOVA, Spearman rank correlation and the
//! risk-preference tallies.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::lottery::RiskClass;
use crate::records::ChoiceRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("no observations")]
    Empty,
    #[error("sample variance needs at least two observations")]
    Singleton,
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("need at least two groups")]
    TooFewGroups,
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("no within-group degrees of freedom")]
    NoWithinDf,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two paired observations")]
    TooShort,
    #[error("ranks have zero variance")]
    ZeroVariance,
    #[error("tally is empty")]
    EmptyTally,
    #[error("no pairable records")]
    NoPairs,
}

/// Variance denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// `n − 1`
    #[default]
    Sample,
    /// `n`
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub stddev: f64,
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub fn mean(xs: &[f64]) -> Result<f64, StatsError> {
    if xs.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(xs)?;
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn dispersion(xs: &[f64], estimator: Estimator) -> Result<Dispersion, StatsError> {
    let m = mean(xs)?;
    let n = xs.len();
    let denom = match estimator {
        Estimator::Sample if n < 2 => return Err(StatsError::Singleton),
        Estimator::Sample => (n - 1) as f64,
        Estimator::Population => n as f64,
    };
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let variance = ss / denom;
    Ok(Dispersion { n, mean: m, variance, stddev: libm::sqrt(variance) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    /// `+∞` when every group is internally constant but the means differ.
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub p_value: f64,
}

impl Anova {
    pub fn is_infinite(&self) -> bool {
        self.f.is_infinite()
    }
}

/// One-way ANOVA across `groups`.
pub fn anova_f<G: AsRef<[f64]>>(groups: &[G]) -> Result<Anova, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups);
    }
    let mut total = 0usize;
    let mut grand_sum = 0.0;
    for (i, g) in groups.iter().enumerate() {
        let g = g.as_ref();
        if g.is_empty() {
            return Err(StatsError::EmptyGroup(i));
        }
        check_finite(g)?;
        total += g.len();
        grand_sum += g.iter().sum::<f64>();
    }
    let k = groups.len();
    if total <= k {
        return Err(StatsError::NoWithinDf);
    }
    let grand = grand_sum / total as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    let df_between = k - 1;
    let df_within = total - k;
    let ms_between = ss_between / df_between as f64;
    let ms_within = ss_within / df_within as f64;
    let (f, p_value) = if ss_between == 0.0 {
        (0.0, 1.0)
    } else if ms_within == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = ms_between / ms_within;
        (f, f_survival(f, df_between as f64, df_within as f64))
    };
    Ok(Anova { f, df_between, df_within, ss_between, ss_within, p_value })
}

/// `P(F > f)` for an F distribution with `(d1, d2)` degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// `I_x(a, b)` by Lentz's continued fraction, using the symmetry
/// `I_x(a,b) = 1 − I_{1−x}(b,a)` where it converges faster.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b)
        + a * libm::log(x)
        + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooShort);
    }
    let mx = mean(xs)?;
    let my = mean(ys)?;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooShort);
    }
    check_finite(xs)?;
    check_finite(ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceTally {
    pub averse: usize,
    pub neutral: usize,
    pub loving: usize,
}

impl PreferenceTally {
    pub fn new(averse: usize, neutral: usize, loving: usize) -> Self {
        PreferenceTally { averse, neutral, loving }
    }

    pub fn total(&self) -> usize {
        self.averse + self.neutral + self.loving
    }

    pub fn add(&mut self, class: RiskClass) {
        match class {
            RiskClass::Averse => self.averse += 1,
            RiskClass::Neutral => self.neutral += 1,
            RiskClass::Loving => self.loving += 1,
        }
    }

    pub fn count(&self, class: RiskClass) -> usize {
        match class {
            RiskClass::Averse => self.averse,
            RiskClass::Neutral => self.neutral,
            RiskClass::Loving => self.loving,
        }
    }

    pub fn share_pct(&self, class: RiskClass) -> Result<f64, StatsError> {
        let total = self.total();
        if total == 0 {
            return Err(StatsError::EmptyTally);
        }
        Ok(100.0 * self.count(class) as f64 / total as f64)
    }

    /// Most frequent class; ties go to the more risk-averse class.
    pub fn modal_class(&self) -> Option<RiskClass> {
        if self.total() == 0 {
            return None;
        }
        let mut best = RiskClass::Averse;
        for c in [RiskClass::Neutral, RiskClass::Loving] {
            if self.count(c) > self.count(best) {
                best = c;
            }
        }
        Some(best)
    }
}

/// Count choices per risk class. Callers group records by (model, form,
/// language, frame) beforehand.
pub fn tally_preferences<'a>(choices: impl IntoIterator<Item = &'a ChoiceRecord>) -> PreferenceTally {
    let mut t = PreferenceTally::default();
    for c in choices {
        t.add(c.risk_class);
    }
    t
}

/// Share of risk-averse choices, in percent.
pub fn aversion_pct(tally: &PreferenceTally) -> Result<f64, StatsError> {
    tally.share_pct(RiskClass::Averse)
}

/// Risk-averse share under loss framing, in percent.
pub fn loss_aversion_pct(loss_tally: &PreferenceTally) -> Result<f64, StatsError> {
    aversion_pct(loss_tally)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramingDiff {
    pub pct: f64,
    pub pairs: usize,
    pub differing: usize,
    pub unpaired: usize,
}

/// Percentage of (scenario, repetition) pairs whose risk class changed
/// between the two language renderings.
pub fn framing_diff(zh: &[ChoiceRecord], en: &[ChoiceRecord]) -> Result<FramingDiff, StatsError> {
    let index = |records: &[ChoiceRecord]| {
        let mut map: BTreeMap<(String, u32), RiskClass> = BTreeMap::new();
        let mut dupes = 0;
        for r in records {
            if map.insert((r.scenario_id.clone(), r.repetition), r.risk_class).is_some() {
                dupes += 1;
            }
        }
        (map, dupes)
    };
    let (a, dupes_a) = index(zh);
    let (b, dupes_b) = index(en);
    let mut pairs = 0;
    let mut differing = 0;
    for (key, class_a) in &a {
        if let Some(class_b) = b.get(key) {
            pairs += 1;
            if class_a != class_b {
                differing += 1;
            }
        }
    }
    let unpaired = (a.len() - pairs) + (b.len() - pairs) + dupes_a + dupes_b;
    if pairs == 0 {
        return Err(StatsError::NoPairs);
    }
    Ok(FramingDiff {
        pct: 100.0 * differing as f64 / pairs as f64,
        pairs,
        differing,
        unpaired,
    })
}

/// `var_cot − var_direct`; negative means deliberation reduced dispersion.
pub fn cot_delta(var_direct: f64, var_cot: f64) -> f64 {
    debug_assert!(var_direct >= 0.0 && var_cot >= 0.0);
    var_cot - var_direct
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lottery::{Frame, Language};
    use crate::records::{InputForm, OptionLabel};
    use alloc::format;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Independent oracles: ANOVA through the total-sum-of-squares identity
    // with explicit element loops, Spearman through O(n²) counting ranks.

    fn oracle_anova(groups: &[Vec<f64>]) -> f64 {
        let all: Vec<f64> = groups.iter().flatten().copied().collect();
        let n = all.len() as f64;
        let mut grand = 0.0;
        for x in &all {
            grand += x / n;
        }
        let mut sst = 0.0;
        for x in &all {
            sst += (x - grand).powi(2);
        }
        let mut ssw = 0.0;
        for g in groups {
            let mut m = 0.0;
            for x in g {
                m += x;
            }
            m /= g.len() as f64;
            for x in g {
                ssw += (x - m).powi(2);
            }
        }
        let ssb = sst - ssw;
        let k = groups.len() as f64;
        (ssb / (k - 1.0)) / (ssw / (n - k))
    }

    fn oracle_rank(xs: &[f64], i: usize) -> f64 {
        let less = xs.iter().filter(|&&x| x < xs[i]).count() as f64;
        let equal = xs.iter().filter(|&&x| x == xs[i]).count() as f64;
        less + (equal + 1.0) / 2.0
    }

    fn oracle_spearman(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len();
        let rx: Vec<f64> = (0..n).map(|i| oracle_rank(xs, i)).collect();
        let ry: Vec<f64> = (0..n).map(|i| oracle_rank(ys, i)).collect();
        let mx = rx.iter().sum::<f64>() / n as f64;
        let my = ry.iter().sum::<f64>() / n as f64;
        let cov: f64 = (0..n).map(|i| (rx[i] - mx) * (ry[i] - my)).sum();
        let vx: f64 = rx.iter().map(|r| (r - mx).powi(2)).sum();
        let vy: f64 = ry.iter().map(|r| (r - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion(&[5.0, 5.0, 5.0], Estimator::Sample).unwrap().variance, 0.0);
        let d = dispersion(&[2.0, 4.0, 6.0], Estimator::Sample).unwrap();
        assert_eq!((d.mean, d.variance, d.stddev), (4.0, 4.0, 2.0));
        assert!((dispersion(&[2.0, 4.0, 6.0], Estimator::Population).unwrap().variance - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(dispersion(&[1.0], Estimator::Sample), Err(StatsError::Singleton));
        assert_eq!(dispersion(&[1.0], Estimator::Population).unwrap().variance, 0.0);
    }

    #[test]
    fn anova_examples() {
        let same = anova_f(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(same.f, 0.0);
        let a = anova_f(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((a.f - 13.5).abs() < 1e-12);
        assert_eq!((a.df_between, a.df_within), (1, 4));
        assert!((a.ss_between - 13.5).abs() < 1e-12 && (a.ss_within - 4.0).abs() < 1e-12);
        // scipy.stats.f_oneway reference
        assert!((a.p_value - 0.02131164112875672).abs() < 1e-10);
        assert_eq!(anova_f(&[vec![1.0], vec![2.0]]), Err(StatsError::NoWithinDf));
        assert_eq!(anova_f(&[vec![1.0, 2.0]]), Err(StatsError::TooFewGroups));
    }

    #[test]
    fn anova_infinite_when_groups_constant() {
        let a = anova_f(&[vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap();
        assert!(a.is_infinite());
        assert_eq!(a.p_value, 0.0);
    }

    #[test]
    fn f_survival_matches_reference() {
        // scipy.stats.f.sf reference values
        for (f, d1, d2, p) in [
            (2.5, 3.0, 10.0, 0.11903956265827816),
            (0.7, 2.0, 7.0, 0.5282817877171738),
            (40.0, 4.0, 20.0, 2.8361056353391905e-09),
        ] {
            let got = f_survival(f, d1, d2);
            assert!((got - p).abs() < 1e-10 * p.max(1e-3), "{f} {d1} {d2}: {got} vs {p}");
        }
        assert!((regularized_incomplete_beta(2.5, 1.5, 0.3) - 0.08894372317066562).abs() < 1e-12);
        assert!((regularized_incomplete_beta(10.0, 20.0, 0.4) - 0.7853183897628262).abs() < 1e-12);
    }

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap() + 1.0).abs() < 1e-12);
        let rho = spearman(&[1.0, 2.0, 2.0, 3.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((rho - 4.5 / 22.5f64.sqrt()).abs() < 1e-12);
        assert!((rho - 0.9487).abs() < 1e-3);
        assert_eq!(spearman(&[1.0, 2.0], &[1.0]), Err(StatsError::LengthMismatch(2, 1)));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(StatsError::ZeroVariance));
    }

    #[test]
    fn oracle_equivalence_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let k = rng.random_range(2..6);
            let groups: Vec<Vec<f64>> = (0..k)
                .map(|_| (0..rng.random_range(2..6)).map(|_| rng.random_range(-10i32..=10) as f64).collect())
                .collect();
            match anova_f(&groups) {
                Ok(a) if a.f.is_finite() && a.f > 0.0 => {
                    let o = oracle_anova(&groups);
                    assert!((a.f - o).abs() <= 1e-9 * o.abs().max(1.0), "{groups:?}");
                }
                _ => {}
            }
            let n = rng.random_range(2..12);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0i32..6) as f64).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0i32..6) as f64).collect();
            if let Ok(r) = spearman(&xs, &ys) {
                assert!((r - oracle_spearman(&xs, &ys)).abs() <= 1e-9);
            }
        }
    }

    fn choice(scenario: &str, rep: u32, class: RiskClass) -> ChoiceRecord {
        ChoiceRecord {
            scenario_id: scenario.into(),
            repetition: rep,
            model_id: "m".into(),
            form: InputForm::Direct,
            language: Language::Zh,
            frame: Frame::Gain,
            label: OptionLabel::A,
            risk_class: class,
        }
    }

    #[test]
    fn tally_examples() {
        assert_eq!(tally_preferences(&[]), PreferenceTally::default());
        let recs = [
            choice("s", 0, RiskClass::Averse),
            choice("s", 1, RiskClass::Neutral),
            choice("s", 2, RiskClass::Loving),
        ];
        assert_eq!(tally_preferences(&recs), PreferenceTally::new(1, 1, 1));
        let mut many = Vec::new();
        for (class, n) in [(RiskClass::Averse, 118), (RiskClass::Neutral, 41), (RiskClass::Loving, 41)] {
            for i in 0..n {
                many.push(choice(&format!("s{i}"), 0, class));
            }
        }
        let t = tally_preferences(&many);
        assert_eq!((t, t.total()), (PreferenceTally::new(118, 41, 41), 200));
    }

    #[test]
    fn aversion_examples() {
        assert!((aversion_pct(&PreferenceTally::new(181, 11, 8)).unwrap() - 90.5).abs() < 1e-12);
        assert_eq!(aversion_pct(&PreferenceTally::new(0, 0, 10)).unwrap(), 0.0);
        assert_eq!(aversion_pct(&PreferenceTally::new(200, 0, 0)).unwrap(), 100.0);
        assert_eq!(aversion_pct(&PreferenceTally::default()), Err(StatsError::EmptyTally));
        assert_eq!(loss_aversion_pct(&PreferenceTally::new(84, 10, 6)).unwrap(), 84.0);
        assert_eq!(loss_aversion_pct(&PreferenceTally::new(0, 0, 1)).unwrap(), 0.0);
        assert_eq!(loss_aversion_pct(&PreferenceTally::new(1, 1, 0)).unwrap(), 50.0);
    }

    #[test]
    fn framing_examples() {
        use RiskClass::*;
        let zh = [choice("s1", 0, Averse), choice("s2", 0, Averse), choice("s3", 0, Loving), choice("s4", 0, Neutral)];
        let en = [choice("s1", 0, Averse), choice("s2", 0, Neutral), choice("s3", 0, Loving), choice("s4", 0, Neutral)];
        let d = framing_diff(&zh, &en).unwrap();
        assert_eq!((d.pct, d.pairs, d.differing), (25.0, 4, 1));
        assert_eq!(framing_diff(&zh, &zh).unwrap().pct, 0.0);
        let flipped = [choice("s1", 0, Loving), choice("s2", 0, Loving), choice("s3", 0, Averse), choice("s4", 0, Averse)];
        assert_eq!(framing_diff(&zh, &flipped).unwrap().pct, 100.0);
        let extra = [choice("s9", 0, Averse)];
        assert_eq!(framing_diff(&zh, &extra), Err(StatsError::NoPairs));
    }

    #[test]
    fn cot_delta_examples() {
        assert!((cot_delta(28.1058, 12.6598) + 15.446).abs() < 1e-9);
        assert!((cot_delta(0.5980, 5.3818) - 4.7838).abs() < 1e-9);
        assert_eq!(cot_delta(3.0, 3.0), 0.0);
    }

    fn class_of(i: u8) -> RiskClass {
        RiskClass::ALL[(i % 3) as usize]
    }

    proptest! {
        #[test]
        fn spearman_bounded_and_rank_invariant(
            pairs in proptest::collection::vec((-50i32..50, -50i32..50), 2..30),
        ) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
            if let Ok(r) = spearman(&xs, &ys) {
                prop_assert!((-1.0..=1.0).contains(&r));
                let tx: Vec<f64> = xs.iter().map(|x| (x / 10.0).exp() + 3.0).collect();
                let ty: Vec<f64> = ys.iter().map(|y| y * y * y).collect();
                let r2 = spearman(&tx, &ty).unwrap();
                prop_assert!((r - r2).abs() < 1e-12);
            }
        }

        #[test]
        fn anova_shift_and_scale_invariant(
            groups in proptest::collection::vec(proptest::collection::vec(-20i32..20, 2..6), 2..5),
            shift in -100.0f64..100.0,
            scale in 0.1f64..10.0,
        ) {
            let g: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|&x| x as f64).collect()).collect();
            let base = anova_f(&g).unwrap();
            let moved: Vec<Vec<f64>> = g.iter().map(|g| g.iter().map(|x| x * scale + shift).collect()).collect();
            let other = anova_f(&moved).unwrap();
            if base.f.is_finite() && base.f > 1e-9 {
                prop_assert!((base.f - other.f).abs() <= 1e-6 * base.f.max(1.0));
            }
        }

        #[test]
        fn shares_sum_to_hundred(a in 0usize..300, n in 0usize..300, l in 1usize..300) {
            let t = PreferenceTally::new(a, n, l);
            let sum: f64 = RiskClass::ALL.iter().map(|&c| t.share_pct(c).unwrap()).sum();
            prop_assert!((sum - 100.0).abs() < 1e-9);
        }

        #[test]
        fn framing_is_symmetric(classes in proptest::collection::vec((0u8..3, 0u8..3), 1..40)) {
            let zh: Vec<_> = classes.iter().enumerate().map(|(i, c)| choice(&format!("s{i}"), 0, class_of(c.0))).collect();
            let en: Vec<_> = classes.iter().enumerate().map(|(i, c)| choice(&format!("s{i}"), 0, class_of(c.1))).collect();
            prop_assert_eq!(framing_diff(&zh, &en).unwrap(), framing_diff(&en, &zh).unwrap());
        }
    }
}
