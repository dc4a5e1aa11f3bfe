//! Scoring keys and questionnaire scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{PsychometricsError, Trait};

/// One keyed item. `reverse` items score as `min + max - answer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyedItem {
    /// 1-based position, matching column `q<index>` of the responses file.
    pub index: usize,
    #[serde(default)]
    pub reverse: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleKey {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub min_points: i64,
    pub max_points: i64,
    pub items: Vec<KeyedItem>,
}

impl ScaleKey {
    pub fn min_total(&self) -> f64 {
        (self.items.len() as i64 * self.min_points) as f64
    }

    pub fn max_total(&self) -> f64 {
        (self.items.len() as i64 * self.max_points) as f64
    }
}

/// Item-to-trait assignment for one questionnaire version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringKey {
    pub version: String,
    pub n_items: usize,
    pub scales: Vec<ScaleKey>,
}

pub const NEO_ITEMS: usize = 60;

/// Item counts of the competency scales at 0..=4 points per item, inferred
/// from the reference cohort's score maxima.
const COMPETENCY_ITEMS: [(Trait, usize); 16] = [
    (Trait::Innovation, 5),
    (Trait::Negotiation, 5),
    (Trait::Communication, 5),
    (Trait::GainingCommitment, 6),
    (Trait::SalesAbility, 3),
    (Trait::StrategicDecisionMaking, 4),
    (Trait::StressTolerance, 3),
    (Trait::Initiative, 4),
    (Trait::WorkStandards, 8),
    (Trait::DecisionMaking, 4),
    (Trait::Teamwork, 3),
    (Trait::Energy, 3),
    (Trait::PlanningAndOrganizing, 3),
    (Trait::FollowUp, 4),
    (Trait::ContinuousLearning, 6),
    (Trait::QualityOrientation, 6),
];

impl ScoringKey {
    /// Default instrument: the 60 NEO-FFI items (q1..q60, factors cycling
    /// N, E, O, A, C, 12 items each) followed by the competency items in
    /// contiguous blocks. All items forward-keyed, 0..=4 points.
    pub fn default_key() -> Self {
        let mut scales = Vec::with_capacity(21);
        for (offset, &t) in Trait::BIG_FIVE.iter().enumerate() {
            let items = (0..12)
                .map(|k| KeyedItem {
                    index: 1 + offset + 5 * k,
                    reverse: false,
                })
                .collect();
            scales.push(ScaleKey {
                trait_id: t,
                min_points: 0,
                max_points: 4,
                items,
            });
        }
        let mut next = NEO_ITEMS + 1;
        for (t, count) in COMPETENCY_ITEMS {
            let items = (next..next + count)
                .map(|index| KeyedItem {
                    index,
                    reverse: false,
                })
                .collect();
            next += count;
            scales.push(ScaleKey {
                trait_id: t,
                min_points: 0,
                max_points: 4,
                items,
            });
        }
        ScoringKey {
            version: "default-1".to_string(),
            n_items: next - 1,
            scales,
        }
    }

    pub fn scale(&self, t: Trait) -> Option<&ScaleKey> {
        self.scales.iter().find(|s| s.trait_id == t)
    }

    /// Checks coverage of all 21 traits, disjoint non-empty item lists and
    /// item indices within `1..=n_items`.
    pub fn validate(&self) -> Result<(), PsychometricsError> {
        let mut seen_traits = BTreeSet::new();
        let mut owner: BTreeMap<usize, Trait> = BTreeMap::new();
        for scale in &self.scales {
            if !seen_traits.insert(scale.trait_id) {
                return Err(PsychometricsError::Schema(format!(
                    "trait `{}` keyed twice",
                    scale.trait_id
                )));
            }
            if scale.items.is_empty() {
                return Err(PsychometricsError::Schema(format!(
                    "trait `{}` has no items",
                    scale.trait_id
                )));
            }
            if scale.min_points >= scale.max_points {
                return Err(PsychometricsError::Schema(format!(
                    "trait `{}` has empty point range {}..={}",
                    scale.trait_id, scale.min_points, scale.max_points
                )));
            }
            for item in &scale.items {
                if item.index == 0 || item.index > self.n_items {
                    return Err(PsychometricsError::UnknownItem {
                        index: item.index,
                        n_items: self.n_items,
                    });
                }
                if let Some(prev) = owner.insert(item.index, scale.trait_id) {
                    return Err(PsychometricsError::Schema(format!(
                        "item q{} keyed to both `{}` and `{}`",
                        item.index, prev, scale.trait_id
                    )));
                }
            }
        }
        if let Some(missing) = Trait::ALL.iter().find(|t| !seen_traits.contains(t)) {
            return Err(PsychometricsError::Schema(format!(
                "trait `{missing}` is not keyed"
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, PsychometricsError> {
        let key: ScoringKey = serde_json::from_str(text)
            .map_err(|e| PsychometricsError::Schema(format!("scoring key: {e}")))?;
        key.validate()?;
        Ok(key)
    }
}

/// Raw answers of one participant; `None` marks an unanswered item.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRow {
    pub participant_id: String,
    pub answers: Vec<Option<i64>>,
}

/// Trait scores of one participant. Traits with an unanswered item are
/// listed in `incomplete` and carry no score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitProfile {
    pub participant_id: String,
    pub scores: BTreeMap<Trait, f64>,
    #[serde(default)]
    pub incomplete: BTreeSet<Trait>,
}

impl TraitProfile {
    pub fn score(&self, t: Trait) -> Option<f64> {
        self.scores.get(&t).copied()
    }

    pub fn is_complete(&self, t: Trait) -> bool {
        self.scores.contains_key(&t) && !self.incomplete.contains(&t)
    }

    /// Every trait is either scored within its key range or flagged
    /// incomplete.
    pub fn validate(&self, key: &ScoringKey) -> Result<(), PsychometricsError> {
        for scale in &key.scales {
            match self.scores.get(&scale.trait_id) {
                Some(&s) => {
                    if !(scale.min_total()..=scale.max_total()).contains(&s) {
                        return Err(PsychometricsError::Validation(format!(
                            "participant `{}`: {} score {s} outside {}..={}",
                            self.participant_id,
                            scale.trait_id,
                            scale.min_total(),
                            scale.max_total()
                        )));
                    }
                }
                None if self.incomplete.contains(&scale.trait_id) => {}
                None => {
                    return Err(PsychometricsError::Validation(format!(
                        "participant `{}`: {} neither scored nor flagged incomplete",
                        self.participant_id, scale.trait_id
                    )))
                }
            }
        }
        Ok(())
    }
}

pub fn score_questionnaire(
    row: &ResponseRow,
    key: &ScoringKey,
) -> Result<TraitProfile, PsychometricsError> {
    if row.answers.len() != key.n_items {
        return Err(PsychometricsError::Schema(format!(
            "participant `{}` has {} answers, key expects {}",
            row.participant_id,
            row.answers.len(),
            key.n_items
        )));
    }
    let mut scores = BTreeMap::new();
    let mut incomplete = BTreeSet::new();
    for scale in &key.scales {
        let mut total = 0i64;
        let mut complete = true;
        for item in &scale.items {
            let answer = *row
                .answers
                .get(item.index.wrapping_sub(1))
                .ok_or(PsychometricsError::UnknownItem {
                    index: item.index,
                    n_items: row.answers.len(),
                })?;
            match answer {
                None => complete = false,
                Some(a) if a < scale.min_points || a > scale.max_points => {
                    return Err(PsychometricsError::AnswerOutOfRange {
                        participant: row.participant_id.clone(),
                        item: item.index,
                        value: a,
                        min: scale.min_points,
                        max: scale.max_points,
                    });
                }
                Some(a) if item.reverse => total += scale.min_points + scale.max_points - a,
                Some(a) => total += a,
            }
        }
        if complete {
            scores.insert(scale.trait_id, total as f64);
        } else {
            incomplete.insert(scale.trait_id);
        }
    }
    Ok(TraitProfile {
        participant_id: row.participant_id.clone(),
        scores,
        incomplete,
    })
}

/// Reads `participant_id,q1..qN`. Empty cells are unanswered items.
pub fn read_responses<R: Read>(reader: R) -> Result<Vec<ResponseRow>, PsychometricsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| PsychometricsError::Schema(format!("responses header: {e}")))?
        .clone();
    if headers.get(0) != Some("participant_id") {
        return Err(PsychometricsError::Schema(
            "first responses column must be `participant_id`".into(),
        ));
    }
    for (pos, name) in headers.iter().enumerate().skip(1) {
        if name != format!("q{pos}") {
            return Err(PsychometricsError::Schema(format!(
                "responses column {pos} is `{name}`, expected `q{pos}`"
            )));
        }
    }
    let mut rows = Vec::new();
    let mut ids = BTreeSet::new();
    for (line, record) in rdr.records().enumerate() {
        let record =
            record.map_err(|e| PsychometricsError::Schema(format!("responses row {}: {e}", line + 2)))?;
        let participant_id = record.get(0).unwrap_or_default().to_string();
        if participant_id.is_empty() || !ids.insert(participant_id.clone()) {
            return Err(PsychometricsError::Schema(format!(
                "responses row {}: empty or duplicate participant id `{participant_id}`",
                line + 2
            )));
        }
        let answers = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(pos, cell)| {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<i64>().map(Some).map_err(|_| PsychometricsError::Validation(format!(
                        "participant `{participant_id}`: item q{pos} has non-integer answer `{cell}`"
                    )))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(ResponseRow {
            participant_id,
            answers,
        });
    }
    Ok(rows)
}
