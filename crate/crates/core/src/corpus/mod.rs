//! Annotated utterances and the operations that turn them into datasets.

mod gold;
mod split;
mod stats;
pub mod synth;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{ByCharacteristic, Characteristic, Error, Result};

pub use gold::{derive_gold, parse_gold_jsonl, Agreement, Difficulty, GoldInstance, GoldPolicy};
pub use split::{stratified_split, NestedSample, Split};
pub use stats::{dataset_stats, ClassCounts, DatasetPartition, PartitionName, StatsTable};
pub use synth::{generate_synthetic, MarkerPools};

/// Per-annotator yes/no votes, one list per characteristic. Annotator order
/// is the same in every list.
pub type Votes = ByCharacteristic<Vec<bool>>;

/// One line of the corpus wire format: an utterance plus its annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: String,
    pub text: String,
    pub author_id: Option<String>,
    pub source: Option<String>,
    pub language: String,
    pub votes: Votes,
    pub difficulty_votes: Option<Vec<bool>>,
}

impl Record {
    /// Number of annotators (length of every vote list).
    pub fn annotator_count(&self) -> usize {
        self.votes.emotionality.len()
    }

    fn validate(&self, line: usize, allow_unannotated: bool) -> Result<()> {
        let schema = |message: String| Error::Schema { line, message };
        if self.id.is_empty() {
            return Err(schema("empty id".into()));
        }
        if self.text.trim().is_empty() {
            return Err(schema(format!("utterance {:?} has empty text", self.id)));
        }
        let n = self.annotator_count();
        if let Some((c, v)) = self.votes.iter().find(|(_, v)| v.len() != n) {
            return Err(schema(format!(
                "utterance {:?}: vote list for {c} has {} entries, expected {n}",
                self.id,
                v.len()
            )));
        }
        if n == 0 && !allow_unannotated {
            return Err(schema(format!("utterance {:?} has no votes", self.id)));
        }
        if matches!(&self.difficulty_votes, Some(d) if d.is_empty()) {
            return Err(schema(format!(
                "utterance {:?}: difficulty_votes must be null or non-empty",
                self.id
            )));
        }
        Ok(())
    }
}

/// A text with a resolved binary label for one characteristic: the unit
/// every classifier trains and evaluates on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub id: String,
    pub text: String,
    pub label: bool,
    pub difficulty: Difficulty,
}

/// Load labelled texts for one task from either the corpus wire format
/// (gold labels resolved with `policy`) or a gold/partition export.
pub fn labeled_from_jsonl(input: &str, task: Characteristic, policy: GoldPolicy) -> Result<Vec<LabeledText>> {
    let first = input.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let is_corpus = serde_json::from_str::<serde_json::Value>(first)
        .map(|v| v.get("votes").is_some())
        .unwrap_or(true);
    let gold = if is_corpus {
        derive_gold(&Corpus::parse_jsonl(input)?, policy)?
    } else {
        parse_gold_jsonl(input)?
    };
    Ok(gold.iter().filter_map(|g| g.labeled(task)).collect())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ImportOptions {
    /// Accept records whose vote lists are all empty (annotation queues).
    pub allow_unannotated: bool,
}

/// An immutable, validated collection of records with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    records: Vec<Record>,
}

impl Corpus {
    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            r.validate(i + 1, true)?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Conflict(r.id.clone()));
            }
        }
        Ok(Corpus { records })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Parse the JSON Lines wire format. Blank lines are skipped.
    pub fn parse_jsonl(input: &str) -> Result<Self> {
        Self::parse_jsonl_with(input, ImportOptions::default())
    }

    pub fn parse_jsonl_with(input: &str, options: ImportOptions) -> Result<Self> {
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in input.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                column: e.column(),
                message: e.to_string(),
            })?;
            record.validate(line_no, options.allow_unannotated)?;
            if !seen.insert(record.id.clone()) {
                return Err(Error::Conflict(record.id));
            }
            records.push(record);
        }
        Ok(Corpus { records })
    }

    pub fn import_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_jsonl(&std::fs::read_to_string(path)?)
    }

    /// Canonical serialization: one compact JSON object per line, fields in
    /// wire order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn export_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }

    /// Keep at most one utterance per author: the one with the
    /// lexicographically smallest id. Utterances without an author are kept.
    /// Relative order of the survivors is preserved.
    pub fn dedupe_by_author(&self) -> Corpus {
        let mut keep: BTreeMap<&str, &str> = BTreeMap::new();
        for r in &self.records {
            if let Some(author) = r.author_id.as_deref() {
                keep.entry(author)
                    .and_modify(|id| {
                        if r.id.as_str() < *id {
                            *id = r.id.as_str();
                        }
                    })
                    .or_insert(r.id.as_str());
            }
        }
        let records = self
            .records
            .iter()
            .filter(|r| match r.author_id.as_deref() {
                Some(author) => keep[author] == r.id,
                None => true,
            })
            .cloned()
            .collect();
        Corpus { records }
    }
}
