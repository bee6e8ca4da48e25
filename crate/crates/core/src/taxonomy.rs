//! Fixed enumerations: the event taxonomy that news items are classified by
//! and the seven cognitive biases the harness measures.

use serde::{Deserialize, Serialize};

/// Top-level grouping of market-moving corporate events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventCategory {
    /// Corporate governance and equity changes.
    #[serde(rename = "CGEC")]
    Cgec,
    /// Financial reports and earnings expectations.
    #[serde(rename = "FREE")]
    Free,
    /// Market behavior and announcements.
    #[serde(rename = "MBA")]
    Mba,
    /// Negative events and risk management.
    #[serde(rename = "NERM")]
    Nerm,
}

impl EventCategory {
    pub const ALL: [EventCategory; 4] = [
        EventCategory::Cgec,
        EventCategory::Free,
        EventCategory::Mba,
        EventCategory::Nerm,
    ];

    pub fn code(self) -> &'static str {
        match self {
            EventCategory::Cgec => "CGEC",
            EventCategory::Free => "FREE",
            EventCategory::Mba => "MBA",
            EventCategory::Nerm => "NERM",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EventCategory::Cgec => "Corporate Governance and Equity Changes",
            EventCategory::Free => "Financial Reports and Earnings Expectations",
            EventCategory::Mba => "Market Behavior and Announcements",
            EventCategory::Nerm => "Negative Events and Risk Management",
        }
    }
}

/// The sixteen event subtypes. Serialized in snake_case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    MajorAssetRestructuring,
    EquityIncentive,
    ShareholdingChange,
    BuyBack,
    RestrictedStockCirculation,
    PerformanceReport,
    PerformanceForecast,
    PrivatePlacement,
    TransferOfShares,
    StockPriceFluctuation,
    BusinessDynamics,
    Dispute,
    Investigation,
    ViolationPenalty,
    LitigationArbitration,
    Guarantee,
}

impl EventType {
    pub const ALL: [EventType; 16] = [
        EventType::MajorAssetRestructuring,
        EventType::EquityIncentive,
        EventType::ShareholdingChange,
        EventType::BuyBack,
        EventType::RestrictedStockCirculation,
        EventType::PerformanceReport,
        EventType::PerformanceForecast,
        EventType::PrivatePlacement,
        EventType::TransferOfShares,
        EventType::StockPriceFluctuation,
        EventType::BusinessDynamics,
        EventType::Dispute,
        EventType::Investigation,
        EventType::ViolationPenalty,
        EventType::LitigationArbitration,
        EventType::Guarantee,
    ];

    pub fn category(self) -> EventCategory {
        use EventType::*;
        match self {
            MajorAssetRestructuring
            | EquityIncentive
            | ShareholdingChange
            | BuyBack
            | RestrictedStockCirculation => EventCategory::Cgec,
            PerformanceReport | PerformanceForecast => EventCategory::Free,
            PrivatePlacement | TransferOfShares | StockPriceFluctuation | BusinessDynamics => {
                EventCategory::Mba
            }
            Dispute | Investigation | ViolationPenalty | LitigationArbitration | Guarantee => {
                EventCategory::Nerm
            }
        }
    }

    pub fn definition(self) -> &'static str {
        use EventType::*;
        match self {
            MajorAssetRestructuring => {
                "Recombination and reallocation of enterprise assets among owners, controllers, and external entities."
            }
            EquityIncentive => {
                "Conditional grants of shareholder rights to employees, aligning their interests with the company."
            }
            ShareholdingChange => "Increases or decreases in shareholders' holdings of company stock.",
            BuyBack => "A listed company repurchasing its own shares with cash or other means.",
            RestrictedStockCirculation => {
                "Restricted shares becoming freely tradable once a lock-up commitment expires."
            }
            PerformanceReport => "Periodic reporting of realized operating results.",
            PerformanceForecast => "Advance disclosure of expected results for an upcoming reporting period.",
            PrivatePlacement => "Targeted issuance of bonds or stock to a small set of institutional or individual investors.",
            TransferOfShares => "Conversion of capital reserve into share capital or issuance of bonus shares.",
            StockPriceFluctuation => "Abnormal price volatility driven by sudden fund inflows or outflows.",
            BusinessDynamics => "Updates on production, sales, and the operating environment of the enterprise.",
            Dispute => "Disputes between companies or between a company and individuals.",
            Investigation => "A formal regulatory investigation opened against the company.",
            ViolationPenalty => "Penalties imposed by regulators for rule violations.",
            LitigationArbitration => "Litigation or arbitration over contracts or other property rights.",
            Guarantee => "Guarantees provided by the company for loans or obligations of other entities.",
        }
    }
}

/// Which half of the framework a bias belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasFamily {
    Belief,
    RiskPreference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    Anchoring,
    LimitedAttention,
    Representativeness,
    Overconfidence,
    SituationalDependence,
    LossAversion,
    Framing,
}

impl BiasKind {
    pub const ALL: [BiasKind; 7] = [
        BiasKind::Anchoring,
        BiasKind::LimitedAttention,
        BiasKind::Representativeness,
        BiasKind::Overconfidence,
        BiasKind::SituationalDependence,
        BiasKind::LossAversion,
        BiasKind::Framing,
    ];

    // Belief biases are measured with scored news/interaction probes,
    // risk-preference biases with lottery scenarios.
    pub fn family(self) -> BiasFamily {
        match self {
            BiasKind::Anchoring
            | BiasKind::LimitedAttention
            | BiasKind::Representativeness
            | BiasKind::Overconfidence => BiasFamily::Belief,
            BiasKind::SituationalDependence | BiasKind::LossAversion | BiasKind::Framing => {
                BiasFamily::RiskPreference
            }
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            BiasKind::Anchoring => "Judgments skewed by the first information received, here the named company.",
            BiasKind::LimitedAttention => "Fast intuitive processing dominating deliberate reasoning.",
            BiasKind::Representativeness => {
                "Probability estimates driven by salient features such as size or industry instead of base rates."
            }
            BiasKind::Overconfidence => "Overweighting one's own information relative to the facts.",
            BiasKind::SituationalDependence => "Risk attitude depending on the context of an otherwise identical choice.",
            BiasKind::LossAversion => "Sensitivity to losses exceeding sensitivity to equal gains.",
            BiasKind::Framing => "Different descriptions of an identical problem leading to different decisions.",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn taxonomy_has_sixteen_types_in_four_categories() {
        assert_eq!(EventType::ALL.len(), 16);
        let distinct: BTreeSet<_> = EventType::ALL.iter().collect();
        assert_eq!(distinct.len(), 16);
        let cats: BTreeSet<_> = EventType::ALL.iter().map(|e| e.category()).collect();
        assert_eq!(cats.len(), 4);
        for cat in EventCategory::ALL {
            assert!(EventType::ALL.iter().any(|e| e.category() == cat));
        }
    }

    #[test]
    fn bias_families_match_probe_kinds() {
        let belief: BTreeSet<_> = BiasKind::ALL
            .iter()
            .filter(|b| b.family() == BiasFamily::Belief)
            .copied()
            .collect();
        assert_eq!(
            belief,
            [
                BiasKind::Anchoring,
                BiasKind::LimitedAttention,
                BiasKind::Representativeness,
                BiasKind::Overconfidence
            ]
            .into_iter()
            .collect()
        );
        assert_eq!(BiasKind::LossAversion.family(), BiasFamily::RiskPreference);
    }
}
