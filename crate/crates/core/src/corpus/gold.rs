use serde::{Deserialize, Serialize};

use super::{Corpus, PartitionName};
use crate::agreement::{difficulty_of, is_unanimous, majority_label};
use crate::{ByCharacteristic, Characteristic, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldPolicy {
    /// Keep, per characteristic, only unanimously labelled instances.
    PerfectOnly,
    /// Label every instance by majority vote.
    MajorityAll,
}

impl std::str::FromStr for GoldPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "perfect" | "perfect_only" => Ok(GoldPolicy::PerfectOnly),
            "majority" | "majority_all" => Ok(GoldPolicy::MajorityAll),
            _ => Err(format!("unknown gold policy {s:?} (perfect|majority)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agreement {
    Perfect,
    Majority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Difficult,
    Unknown,
}

/// A resolved instance. A characteristic whose label is `None` was dropped
/// for that characteristic (non-unanimous under [`GoldPolicy::PerfectOnly`]).
///
/// This is also the gold/partition export row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldInstance {
    pub id: String,
    pub text: String,
    pub labels: ByCharacteristic<Option<bool>>,
    pub agreement: ByCharacteristic<Option<Agreement>>,
    pub difficulty: Difficulty,
    #[serde(default)]
    pub partition: Option<PartitionName>,
}

impl GoldInstance {
    pub fn labeled(&self, task: Characteristic) -> Option<super::LabeledText> {
        self.labels[task].map(|label| super::LabeledText {
            id: self.id.clone(),
            text: self.text.clone(),
            label,
            difficulty: self.difficulty,
        })
    }
}

/// Resolve gold labels for every record with at least one vote.
pub fn derive_gold(corpus: &Corpus, policy: GoldPolicy) -> Result<Vec<GoldInstance>> {
    let mut out = Vec::with_capacity(corpus.len());
    for r in corpus.records() {
        if r.annotator_count() == 0 {
            continue;
        }
        let mut labels = ByCharacteristic::default();
        let mut agreement = ByCharacteristic::default();
        for c in Characteristic::ALL {
            let votes = &r.votes[c];
            if is_unanimous(votes) {
                labels[c] = Some(votes[0]);
                agreement[c] = Some(Agreement::Perfect);
            } else if policy == GoldPolicy::MajorityAll {
                let label = majority_label(votes).map_err(|e| Error::Resolution(format!("utterance {:?}, {c}: {e}", r.id)))?;
                labels[c] = Some(label);
                agreement[c] = Some(Agreement::Majority);
            }
        }
        let difficulty = r.difficulty_votes.as_deref().map_or(Difficulty::Unknown, difficulty_of);
        out.push(GoldInstance {
            id: r.id.clone(),
            text: r.text.clone(),
            labels,
            agreement,
            difficulty,
            partition: None,
        });
    }
    Ok(out)
}

pub fn parse_gold_jsonl(input: &str) -> Result<Vec<GoldInstance>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let g: GoldInstance = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        out.push(g);
    }
    Ok(out)
}
