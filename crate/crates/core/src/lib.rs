//! Probe construction, response parsing and bias statistics for evaluating
//! the financial rationality of language models. IO-free; the `finbias`
//! crate supplies the gateway, file formats and CLI.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod fmt;
pub mod indicators;
pub mod lottery;
pub mod parse;
pub mod prompting;
pub mod records;
pub mod stats;
pub mod summary;
pub mod taxonomy;
pub mod topics;

pub use corpus::{Company, Corpus, EventNews, Interaction, Tier};
pub use indicators::{compute_bias_report, BiasReport, Indicator, IndicatorConfig, ScoreMatrix};
pub use lottery::{Frame, Language, Lottery, RiskClass, RiskScenario};
pub use records::{ChoiceRecord, InputForm, ScoreRecord, ScoreScale};
