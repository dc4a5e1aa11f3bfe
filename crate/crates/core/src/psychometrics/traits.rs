//! Trait identifiers, label schemes and the reference descriptive statistics
//! of the 400-participant cohort.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the 21 predicted targets: five Big Five factors followed by the
/// sixteen behavioral competencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trait {
    Neuroticism,
    Extraversion,
    Openness,
    Agreeableness,
    Conscientiousness,
    Innovation,
    Negotiation,
    Communication,
    GainingCommitment,
    SalesAbility,
    StrategicDecisionMaking,
    StressTolerance,
    Initiative,
    WorkStandards,
    DecisionMaking,
    Teamwork,
    Energy,
    PlanningAndOrganizing,
    FollowUp,
    ContinuousLearning,
    QualityOrientation,
}

impl Trait {
    pub const ALL: [Trait; 21] = [
        Trait::Neuroticism,
        Trait::Extraversion,
        Trait::Openness,
        Trait::Agreeableness,
        Trait::Conscientiousness,
        Trait::Innovation,
        Trait::Negotiation,
        Trait::Communication,
        Trait::GainingCommitment,
        Trait::SalesAbility,
        Trait::StrategicDecisionMaking,
        Trait::StressTolerance,
        Trait::Initiative,
        Trait::WorkStandards,
        Trait::DecisionMaking,
        Trait::Teamwork,
        Trait::Energy,
        Trait::PlanningAndOrganizing,
        Trait::FollowUp,
        Trait::ContinuousLearning,
        Trait::QualityOrientation,
    ];

    pub const BIG_FIVE: [Trait; 5] = [
        Trait::Neuroticism,
        Trait::Extraversion,
        Trait::Openness,
        Trait::Agreeableness,
        Trait::Conscientiousness,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Trait::Neuroticism => "neuroticism",
            Trait::Extraversion => "extraversion",
            Trait::Openness => "openness",
            Trait::Agreeableness => "agreeableness",
            Trait::Conscientiousness => "conscientiousness",
            Trait::Innovation => "innovation",
            Trait::Negotiation => "negotiation",
            Trait::Communication => "communication",
            Trait::GainingCommitment => "gaining_commitment",
            Trait::SalesAbility => "sales_ability",
            Trait::StrategicDecisionMaking => "strategic_decision_making",
            Trait::StressTolerance => "stress_tolerance",
            Trait::Initiative => "initiative",
            Trait::WorkStandards => "work_standards",
            Trait::DecisionMaking => "decision_making",
            Trait::Teamwork => "teamwork",
            Trait::Energy => "energy",
            Trait::PlanningAndOrganizing => "planning_and_organizing",
            Trait::FollowUp => "follow_up",
            Trait::ContinuousLearning => "continuous_learning",
            Trait::QualityOrientation => "quality_orientation",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Trait::Neuroticism => "Neuroticism",
            Trait::Extraversion => "Extraversion",
            Trait::Openness => "Openness to Experience",
            Trait::Agreeableness => "Agreeableness",
            Trait::Conscientiousness => "Conscientiousness",
            Trait::Innovation => "Innovation",
            Trait::Negotiation => "Negotiation",
            Trait::Communication => "Communication",
            Trait::GainingCommitment => "Gaining Commitment",
            Trait::SalesAbility => "Sales Ability/Persuasiveness",
            Trait::StrategicDecisionMaking => "Strategic Decision Making",
            Trait::StressTolerance => "Stress Tolerance",
            Trait::Initiative => "Initiative",
            Trait::WorkStandards => "Work Standards",
            Trait::DecisionMaking => "Decision Making",
            Trait::Teamwork => "Teamwork",
            Trait::Energy => "Energy",
            Trait::PlanningAndOrganizing => "Planning and Organizing",
            Trait::FollowUp => "Follow-Up",
            Trait::ContinuousLearning => "Continuous Learning",
            Trait::QualityOrientation => "Quality Orientation",
        }
    }

    pub fn is_big_five(self) -> bool {
        Trait::BIG_FIVE.contains(&self)
    }

    /// Cohort statistics of the reference study (400 participants).
    pub fn reference_stats(self) -> ReferenceStats {
        let (min, max, mean, sd) = match self {
            Trait::Neuroticism => (1.0, 48.0, 21.87, 9.51),
            Trait::Extraversion => (7.0, 48.0, 31.28, 7.72),
            Trait::Openness => (11.0, 46.0, 29.55, 5.60),
            Trait::Agreeableness => (11.0, 45.0, 30.65, 5.58),
            Trait::Conscientiousness => (14.0, 48.0, 33.94, 6.88),
            Trait::Innovation => (2.0, 20.0, 11.20, 3.21),
            Trait::Negotiation => (3.0, 20.0, 13.56, 2.67),
            Trait::Communication => (2.0, 20.0, 13.48, 3.23),
            Trait::GainingCommitment => (1.0, 24.0, 16.25, 4.53),
            Trait::SalesAbility => (0.0, 12.0, 6.63, 2.53),
            Trait::StrategicDecisionMaking => (1.0, 16.0, 10.70, 3.12),
            Trait::StressTolerance => (0.0, 12.0, 6.95, 2.79),
            Trait::Initiative => (2.0, 16.0, 10.53, 2.82),
            Trait::WorkStandards => (8.0, 32.0, 24.93, 4.38),
            Trait::DecisionMaking => (1.0, 16.0, 10.29, 3.27),
            Trait::Teamwork => (0.0, 12.0, 8.33, 2.35),
            Trait::Energy => (0.0, 12.0, 7.48, 3.19),
            Trait::PlanningAndOrganizing => (1.0, 12.0, 7.65, 2.81),
            Trait::FollowUp => (2.0, 16.0, 10.05, 2.64),
            Trait::ContinuousLearning => (6.0, 24.0, 17.02, 3.24),
            Trait::QualityOrientation => (2.0, 24.0, 15.53, 4.44),
        };
        ReferenceStats {
            observed_min: min,
            observed_max: max,
            mean,
            sd,
        }
    }
}

impl fmt::Display for Trait {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Trait {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Trait::ALL
            .iter()
            .copied()
            .find(|t| t.id() == s)
            .ok_or_else(|| format!("unknown trait id `{s}`"))
    }
}

/// Observed range and moments of one trait in the reference cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceStats {
    pub observed_min: f64,
    pub observed_max: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Label granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Two,
    Three,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Two, Scheme::Three];

    pub fn n_classes(self) -> usize {
        match self {
            Scheme::Two => 2,
            Scheme::Three => 3,
        }
    }

    /// Levels in class-index order.
    pub fn levels(self) -> &'static [Level] {
        match self {
            Scheme::Two => &[Level::Low, Level::High],
            Scheme::Three => &[Level::Low, Level::Medium, Level::High],
        }
    }

    pub fn class_index(self, level: Level) -> Option<usize> {
        self.levels().iter().position(|&l| l == level)
    }

    pub fn level(self, class_index: usize) -> Option<Level> {
        self.levels().get(class_index).copied()
    }

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Two => "two",
            Scheme::Three => "three",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "two" | "2" => Ok(Scheme::Two),
            "three" | "3" => Ok(Scheme::Three),
            other => Err(format!("unknown scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Low,
    Medium,
    High,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        })
    }
}

/// A level tagged with the scheme that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraitLabel {
    scheme: Scheme,
    level: Level,
}

impl TraitLabel {
    /// Returns `None` when the level is not legal for the scheme.
    pub fn new(scheme: Scheme, level: Level) -> Option<Self> {
        scheme.class_index(level).map(|_| Self { scheme, level })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn class_index(&self) -> usize {
        self.scheme.class_index(self.level).expect("validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for t in Trait::ALL {
            assert_eq!(t.id().parse::<Trait>().unwrap(), t);
        }
        assert!("nope".parse::<Trait>().is_err());
    }

    #[test]
    fn medium_is_illegal_for_two_level() {
        assert!(TraitLabel::new(Scheme::Two, Level::Medium).is_none());
        assert_eq!(TraitLabel::new(Scheme::Three, Level::High).unwrap().class_index(), 2);
    }
}
