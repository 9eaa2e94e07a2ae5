//! Deterministic synthetic corpora with labels set by construction.
//!
//! Each utterance draws an independent fair yes/no label per characteristic.
//! With probability `marker_strength` the text is faithful to the label for
//! that characteristic (a marker phrase appears iff the label is yes);
//! otherwise marker presence is a coin flip. Non-faithful emotionality makes
//! the instance difficult (at least two difficulty votes).

use std::sync::OnceLock;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::Deserialize;

use super::{Corpus, Record};
use crate::{rng, ByCharacteristic, Characteristic, Error, Result};

const BUNDLED_MARKERS: &str = include_str!("../../data/synthetic_markers.json");

/// Versioned marker phrases per characteristic plus neutral filler.
/// `{num}` in a marker is replaced by a random integer.
#[derive(Debug, Clone, Deserialize)]
pub struct MarkerPools {
    pub version: u32,
    pub markers: ByCharacteristic<Vec<String>>,
    pub filler: Vec<String>,
}

impl MarkerPools {
    pub fn bundled() -> &'static MarkerPools {
        static POOLS: OnceLock<MarkerPools> = OnceLock::new();
        POOLS.get_or_init(|| serde_json::from_str(BUNDLED_MARKERS).expect("bundled marker pools"))
    }

    /// Whether `text` contains any marker of `c` (case-insensitive).
    pub fn contains_marker(&self, text: &str, c: Characteristic) -> bool {
        let hay = text.to_lowercase();
        self.markers[c].iter().any(|m| matches_template(&hay, m))
    }
}

fn matches_template(hay: &str, template: &str) -> bool {
    let parts: Vec<&str> = template.split("{num}").collect();
    hay.match_indices(parts[0])
        .any(|(start, _)| rest_matches(&hay[start + parts[0].len()..], &parts[1..]))
}

fn rest_matches(hay: &str, parts: &[&str]) -> bool {
    let Some((next, tail)) = parts.split_first() else {
        return true;
    };
    let digits = hay.bytes().take_while(u8::is_ascii_digit).count();
    digits > 0 && hay[digits..].starts_with(next) && rest_matches(&hay[digits + next.len()..], tail)
}

pub fn generate_synthetic(seed: u64, n: usize, marker_strength: f64) -> Result<Corpus> {
    if n < 10 {
        return Err(Error::InvalidConfig(format!(
            "synthetic corpus needs at least 10 utterances, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&marker_strength) {
        return Err(Error::InvalidConfig(format!("marker strength {marker_strength} outside [0, 1]")));
    }
    let pools = MarkerPools::bundled();
    let mut rng = rng::seeded(seed);
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let labels = ByCharacteristic::from_fn(|_| rng.random_bool(0.5));
        let faithful = ByCharacteristic::from_fn(|_| rng.random_bool(marker_strength));

        let mut segments: Vec<String> = Vec::new();
        for c in Characteristic::ALL {
            let present = if faithful[c] { labels[c] } else { rng.random_bool(0.5) };
            if present {
                let template = pools.markers[c].choose(&mut rng).expect("non-empty pool");
                segments.push(fill_numbers(template, &mut rng));
            }
        }
        let n_filler = if rng.random_bool(0.1) {
            rng.random_range(9..=13)
        } else {
            rng.random_range(1..=4)
        };
        for _ in 0..n_filler {
            segments.push(pools.filler.choose(&mut rng).expect("filler").clone());
        }
        segments.shuffle(&mut rng);
        let text = segments.iter().map(|s| sentence(s)).collect::<Vec<_>>().join(" ");

        let difficult = !faithful.emotionality;
        let n_true = if difficult {
            rng.random_range(2..=3)
        } else {
            rng.random_range(0..=1)
        };
        let mut difficulty_votes: Vec<bool> = (0..3).map(|k| k < n_true).collect();
        difficulty_votes.shuffle(&mut rng);

        records.push(Record {
            id: format!("syn{seed}-{i:06}"),
            text,
            author_id: Some(format!("author-{i:06}")),
            source: Some("synthetic".into()),
            language: "en".into(),
            votes: labels.map(|_, &l| vec![l; 3]),
            difficulty_votes: Some(difficulty_votes),
        });
    }
    Corpus::from_records(records)
}

fn fill_numbers(template: &str, rng: &mut rng::Rng) -> String {
    let mut out = String::new();
    for (k, part) in template.split("{num}").enumerate() {
        if k > 0 {
            out.push_str(&rng.random_range(2..=2020).to_string());
        }
        out.push_str(part);
    }
    out
}

fn sentence(segment: &str) -> String {
    let mut chars = segment.chars();
    let mut out: String = match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    };
    if !out.ends_with(['!', '?', '.']) {
        out.push('.');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{derive_gold, Difficulty, GoldPolicy};

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic(1, 100, 0.8).unwrap();
        let b = generate_synthetic(1, 100, 0.8).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        assert_ne!(a.to_jsonl(), generate_synthetic(2, 100, 0.8).unwrap().to_jsonl());
    }

    #[test]
    fn full_strength_markers_match_labels() {
        let pools = MarkerPools::bundled();
        let corpus = generate_synthetic(7, 500, 1.0).unwrap();
        for r in corpus.records() {
            for c in Characteristic::ALL {
                assert_eq!(pools.contains_marker(&r.text, c), r.votes[c][0], "{c} in {:?}", r.text);
            }
        }
        let gold = derive_gold(&corpus, GoldPolicy::PerfectOnly).unwrap();
        assert!(gold.iter().all(|g| g.difficulty == Difficulty::Easy));
    }

    #[test]
    fn half_strength_class_balance() {
        let corpus = generate_synthetic(11, 2000, 0.5).unwrap();
        for c in Characteristic::ALL {
            let yes = corpus.records().iter().filter(|r| r.votes[c][0]).count();
            let frac = yes as f64 / 2000.0;
            assert!((0.45..=0.55).contains(&frac), "{c}: {frac}");
        }
    }

    #[test]
    fn template_matching() {
        assert!(matches_template("x the price is 45 dollars.", "the price is {num} dollars"));
        assert!(!matches_template("the price is dollars", "the price is {num} dollars"));
        assert!(matches_template(
            "version 3 was released in 2019",
            "version {num} was released in {num}"
        ));
    }

    #[test]
    fn rejects_tiny_corpora() {
        assert!(generate_synthetic(1, 9, 0.5).is_err());
        assert!(generate_synthetic(1, 10, 1.5).is_err());
    }
}
