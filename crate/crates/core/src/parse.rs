//! Extraction of scores, option choices and reasoning text from raw
//! completions.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Company;
use crate::records::{OptionLabel, ScoreScale};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ParseError {
    #[error("no parsable integer score")]
    Unparseable,
    #[error("score {value} outside [{min}, {max}]")]
    OutOfRange { value: i64, min: i32, max: i32 },
    #[error("no option label found")]
    NoLabel,
    #[error("conflicting option labels")]
    ConflictingLabels,
}

/// Marker lists used by the extractors. Latin markers match
/// case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub score_markers: Vec<String>,
    /// Fall back to the first integer in the text when no marker matches.
    pub allow_bare_integer: bool,
    /// Markers that introduce a final answer, e.g. `选择：B`, `Answer: B`.
    pub answer_markers: Vec<String>,
    /// Markers that introduce an option mention, e.g. `Option C`.
    pub option_markers: Vec<String>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        ExtractConfig {
            score_markers: v(&["评分", "得分", "打分", "分数", "score", "rating"]),
            allow_bare_integer: true,
            answer_markers: v(&["选择", "答案", "我选", "answer", "choose", "choice", "pick", "select"]),
            option_markers: v(&["选项", "option"]),
        }
    }
}

fn is_separator(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            ':' | '：' | '=' | '为' | '是' | '*' | '#' | '"' | '“' | '”' | '【' | '】' | '[' | ']' | '(' | ')'
                | '（' | '）' | '「' | '」' | '\'' | '`'
        )
}

fn is_minus(c: char) -> bool {
    matches!(c, '-' | '−' | '－' | '–')
}

fn digit_value(c: char) -> Option<u32> {
    match c {
        '0'..='9' => Some(c as u32 - '0' as u32),
        '０'..='９' => Some(c as u32 - '０' as u32),
        _ => None,
    }
}

/// Signed integer starting exactly at `s`, with the byte length consumed.
/// Values too long to fit are reported as `i64::MAX`/`MIN`.
fn leading_int(s: &str) -> Option<(i64, usize)> {
    let mut chars = s.char_indices().peekable();
    let mut negative = false;
    let mut consumed = 0;
    if let Some(&(_, c)) = chars.peek() {
        if is_minus(c) || c == '+' || c == '＋' {
            negative = is_minus(c);
            consumed = c.len_utf8();
            chars.next();
        }
    }
    let mut value: i64 = 0;
    let mut digits = 0;
    while let Some(&(i, c)) = chars.peek() {
        match digit_value(c) {
            Some(d) => {
                value = value.saturating_mul(10).saturating_add(i64::from(d));
                digits += 1;
                consumed = i + c.len_utf8();
                chars.next();
            }
            None => break,
        }
    }
    if digits == 0 {
        return None;
    }
    Some((if negative { -value } else { value }, consumed))
}

fn skip_separators(s: &str, max_chars: usize) -> usize {
    s.char_indices()
        .take(max_chars)
        .find(|&(_, c)| !is_separator(c))
        .map(|(i, _)| i)
        .unwrap_or_else(|| s.chars().take(max_chars).map(char::len_utf8).sum())
}

/// Byte positions of every marker occurrence, sorted.
fn marker_hits<'a>(text: &str, markers: impl Iterator<Item = &'a String>) -> Vec<(usize, usize)> {
    let folded = text.to_ascii_lowercase();
    let mut hits = Vec::new();
    for m in markers {
        let m = m.to_ascii_lowercase();
        if m.is_empty() {
            continue;
        }
        let mut from = 0;
        while let Some(pos) = folded[from..].find(&m) {
            hits.push((from + pos, m.len()));
            from += pos + m.len();
        }
    }
    hits.sort();
    hits
}

/// Byte span `(start, end)` and value of each marker-anchored score token.
fn score_tokens(text: &str, cfg: &ExtractConfig) -> Vec<(usize, usize, i64)> {
    let mut out = Vec::new();
    let mut last_end = 0;
    for (pos, len) in marker_hits(text, cfg.score_markers.iter()) {
        if pos < last_end {
            continue;
        }
        let after = pos + len;
        let skip = skip_separators(&text[after..], 8);
        if let Some((v, used)) = leading_int(&text[after + skip..]) {
            let end = after + skip + used;
            out.push((pos, end, v));
            last_end = end;
        }
    }
    out
}

fn bare_integer(text: &str) -> Option<i64> {
    let mut prev: Option<char> = None;
    for (i, c) in text.char_indices() {
        let starts_number = digit_value(c).is_some() || is_minus(c) || c == '+';
        let glued = prev.is_some_and(|p| digit_value(p).is_some() || p.is_ascii_alphabetic());
        if starts_number && !glued {
            if let Some((v, _)) = leading_int(&text[i..]) {
                return Some(v);
            }
        }
        prev = Some(c);
    }
    None
}

/// First integer following a score marker (or, if allowed, the first
/// integer anywhere), checked against `scale`.
pub fn extract_score(text: &str, scale: ScoreScale, cfg: &ExtractConfig) -> Result<i32, ParseError> {
    let value = score_tokens(text, cfg)
        .first()
        .map(|&(_, _, v)| v)
        .or_else(|| if cfg.allow_bare_integer { bare_integer(text) } else { None })
        .ok_or(ParseError::Unparseable)?;
    if !scale.contains(value) {
        return Err(ParseError::OutOfRange { value, min: scale.min, max: scale.max });
    }
    Ok(value as i32)
}

fn standalone_label(text: &str, at: usize) -> Option<OptionLabel> {
    let c = text[at..].chars().next()?;
    let label = OptionLabel::from_char(c)?;
    let next = text[at + c.len_utf8()..].chars().next();
    let prev = text[..at].chars().next_back();
    let glued = |x: Option<char>| x.is_some_and(|x| x.is_ascii_alphanumeric());
    if glued(next) || glued(prev) {
        None
    } else {
        Some(label)
    }
}

fn anchored_labels<'a>(text: &str, markers: impl Iterator<Item = &'a String>) -> Vec<OptionLabel> {
    marker_hits(text, markers)
        .into_iter()
        .filter_map(|(pos, len)| {
            let after = pos + len;
            let skip = skip_separators(&text[after..], 6);
            standalone_label(text, after + skip)
        })
        .collect()
}

/// Option label chosen in a response.
///
/// Resolution order: the last label after an answer marker (the final
/// answer line wins over deliberation); else labels after option markers,
/// which must agree; else standalone capital A/B/C anywhere, which must be
/// unique.
pub fn extract_choice(text: &str, cfg: &ExtractConfig) -> Result<OptionLabel, ParseError> {
    if let Some(&label) = anchored_labels(text, cfg.answer_markers.iter()).last() {
        return Ok(label);
    }
    let unique = |labels: Vec<OptionLabel>| -> Option<Result<OptionLabel, ParseError>> {
        let set: BTreeSet<_> = labels.into_iter().collect();
        match set.len() {
            0 => None,
            1 => set.into_iter().next().map(Ok),
            _ => Some(Err(ParseError::ConflictingLabels)),
        }
    };
    if let Some(r) = unique(anchored_labels(text, cfg.option_markers.iter())) {
        return r;
    }
    let bare: Vec<_> = text
        .char_indices()
        .filter_map(|(i, _)| standalone_label(text, i))
        .collect();
    unique(bare).unwrap_or(Err(ParseError::NoLabel))
}

pub const SUBJECT_MASK: &str = "〔主体〕";
pub const INDUSTRY_MASK: &str = "〔行业〕";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizedReasoning {
    pub text: String,
    /// Nothing but masks, whitespace and punctuation remained.
    pub empty: bool,
}

fn strip_scores(text: &str, score: Option<i32>, cfg: &ExtractConfig) -> String {
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for (start, end, _) in score_tokens(text, cfg) {
        out.push_str(&text[cursor..start]);
        cursor = end;
    }
    out.push_str(&text[cursor..]);
    if let Some(s) = score {
        let suffixed = alloc::format!("{s}分");
        if !suffixed.is_empty() {
            out = out.replace(&suffixed, "");
        }
    }
    out
}

/// Remove the score and anything identifying the subject company so the
/// remaining reasoning can be clustered on content alone. Names become
/// [`SUBJECT_MASK`], the industry label becomes [`INDUSTRY_MASK`].
pub fn sanitize_reasoning(
    text: &str,
    company: &Company,
    score: Option<i32>,
    cfg: &ExtractConfig,
) -> SanitizedReasoning {
    let mut names: Vec<(&str, &str)> = [
        (company.display_name.as_str(), SUBJECT_MASK),
        (company.pseudonym.as_str(), SUBJECT_MASK),
        (company.industry.as_str(), INDUSTRY_MASK),
    ]
    .into_iter()
    .filter(|(n, _)| !n.is_empty() && !SUBJECT_MASK.contains(n) && !INDUSTRY_MASK.contains(n))
    .collect();
    names.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.0.cmp(b.0)));

    let mut current = text.to_string();
    loop {
        let mut next = strip_scores(&current, score, cfg);
        for (name, mask) in &names {
            next = next.replace(name, mask);
        }
        if next == current {
            break;
        }
        current = next;
    }
    let residue = current.replace(SUBJECT_MASK, "").replace(INDUSTRY_MASK, "");
    let empty = !residue.chars().any(|c| c.is_alphanumeric());
    SanitizedReasoning { text: current, empty }
}

/// Tally of parse outcomes; `parsed + unparseable + out_of_range +
/// no_label + conflicting == total`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub total: usize,
    pub parsed: usize,
    pub unparseable: usize,
    pub out_of_range: usize,
    pub no_label: usize,
    pub conflicting: usize,
}

impl ParseStats {
    pub fn record<T>(&mut self, outcome: &Result<T, ParseError>) {
        self.total += 1;
        match outcome {
            Ok(_) => self.parsed += 1,
            Err(ParseError::Unparseable) => self.unparseable += 1,
            Err(ParseError::OutOfRange { .. }) => self.out_of_range += 1,
            Err(ParseError::NoLabel) => self.no_label += 1,
            Err(ParseError::ConflictingLabels) => self.conflicting += 1,
        }
    }

    pub fn failed(&self) -> usize {
        self.unparseable + self.out_of_range + self.no_label + self.conflicting
    }

    pub fn is_consistent(&self) -> bool {
        self.parsed + self.failed() == self.total
    }

    pub fn merge(&mut self, other: &ParseStats) {
        self.total += other.total;
        self.parsed += other.parsed;
        self.unparseable += other.unparseable;
        self.out_of_range += other.out_of_range;
        self.no_label += other.no_label;
        self.conflicting += other.conflicting;
    }
}
