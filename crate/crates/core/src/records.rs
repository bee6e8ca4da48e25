//! Small domain types shared by prompting, parsing and the indicator battery.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::lottery::{Frame, Language, RiskClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputForm {
    /// Ask for the answer only ("fast thinking").
    Direct,
    /// Direct, prefixed by the risk-averse persona line.
    Instruct,
    /// Ask for articulated reasoning before the answer ("slow thinking").
    Cot,
    /// Direct form over the English rendering of a risk scenario.
    Translation,
}

impl InputForm {
    pub fn as_str(self) -> &'static str {
        match self {
            InputForm::Direct => "direct",
            InputForm::Instruct => "instruct",
            InputForm::Cot => "cot",
            InputForm::Translation => "translation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    News,
    Interaction,
    Risk,
}

/// Inclusive integer range a model's score must fall in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScoreScale {
    pub min: i32,
    pub max: i32,
}

impl Default for ScoreScale {
    fn default() -> Self {
        ScoreScale { min: -10, max: 10 }
    }
}

impl ScoreScale {
    pub fn contains(&self, v: i64) -> bool {
        v >= i64::from(self.min) && v <= i64::from(self.max)
    }

    pub fn is_valid(&self) -> bool {
        self.min < self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OptionLabel {
    A,
    B,
    C,
}

impl OptionLabel {
    pub const ALL: [OptionLabel; 3] = [OptionLabel::A, OptionLabel::B, OptionLabel::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            OptionLabel::A => 'A',
            OptionLabel::B => 'B',
            OptionLabel::C => 'C',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'A' | 'Ａ' => Some(OptionLabel::A),
            'B' | 'Ｂ' => Some(OptionLabel::B),
            'C' | 'Ｃ' => Some(OptionLabel::C),
            _ => None,
        }
    }
}

/// One parsed belief-probe score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub probe_id: String,
    pub company_id: String,
    pub model_id: String,
    pub form: InputForm,
    pub score: i32,
}

/// One parsed risk-scenario choice, already mapped back to its risk class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceRecord {
    pub scenario_id: String,
    pub repetition: u32,
    pub model_id: String,
    pub form: InputForm,
    pub language: Language,
    pub frame: Frame,
    pub label: OptionLabel,
    pub risk_class: RiskClass,
}
