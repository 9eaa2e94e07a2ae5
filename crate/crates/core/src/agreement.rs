//! Inter-annotator agreement.
//!
//! The headline statistic is the percentage of instances on which every
//! annotator gave the same label. Fleiss' kappa is reported alongside as an
//! extra chance-corrected statistic.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Difficulty};
use crate::{ByCharacteristic, Characteristic, Error, Result};

pub fn is_unanimous(votes: &[bool]) -> bool {
    votes.windows(2).all(|w| w[0] == w[1])
}

/// Majority label of an odd-length vote list.
pub fn majority_vote(votes: &[bool]) -> Result<bool> {
    if votes.len().is_multiple_of(2) {
        return Err(Error::Resolution(format!("{} votes: an even count can tie", votes.len())));
    }
    majority_label(votes)
}

/// Strict-majority label for any vote count; a tie is an error.
pub fn majority_label(votes: &[bool]) -> Result<bool> {
    let yes = votes.iter().filter(|&&v| v).count();
    let no = votes.len() - yes;
    match yes.cmp(&no) {
        std::cmp::Ordering::Greater => Ok(true),
        std::cmp::Ordering::Less => Ok(false),
        std::cmp::Ordering::Equal => Err(Error::Resolution(format!("tie at {yes} votes each"))),
    }
}

/// Difficult iff at least two annotators marked the instance difficult.
/// An empty vote list is `Unknown`.
pub fn difficulty_of(difficulty_votes: &[bool]) -> Difficulty {
    if difficulty_votes.is_empty() {
        return Difficulty::Unknown;
    }
    if difficulty_votes.iter().filter(|&&v| v).count() >= 2 {
        Difficulty::Difficult
    } else {
        Difficulty::Easy
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Percent of instances with identical votes; `None` without instances.
    pub per_characteristic: ByCharacteristic<Option<f64>>,
    pub n_instances: usize,
    /// Records skipped because they have fewer than two annotators.
    pub excluded: usize,
    pub disagreement_ids: ByCharacteristic<Vec<String>>,
    /// Fleiss' kappa (not a percentage); `None` when undefined.
    pub fleiss_kappa: ByCharacteristic<Option<f64>>,
}

pub fn perfect_agreement(corpus: &Corpus) -> AgreementReport {
    let rated: Vec<_> = corpus.records().iter().filter(|r| r.annotator_count() >= 2).collect();
    let excluded = corpus.len() - rated.len();
    if excluded > 0 {
        log::warn!("{excluded} records with fewer than two annotators excluded from agreement");
    }
    let n = rated.len();
    let disagreement_ids = ByCharacteristic::from_fn(|c| {
        let mut ids: Vec<String> = rated.iter().filter(|r| !is_unanimous(&r.votes[c])).map(|r| r.id.clone()).collect();
        ids.sort();
        ids
    });
    let per_characteristic = disagreement_ids.map(|_, ids| (n > 0).then(|| 100.0 * (n - ids.len()) as f64 / n as f64));
    let fleiss_kappa = ByCharacteristic::from_fn(|c| fleiss_kappa(rated.iter().map(|r| r.votes[c].as_slice())));
    AgreementReport {
        per_characteristic,
        n_instances: n,
        excluded,
        disagreement_ids,
        fleiss_kappa,
    }
}

/// Fleiss' kappa for binary ratings, allowing the rater count to vary per
/// item (items with fewer than two ratings are ignored).
pub fn fleiss_kappa<'a>(items: impl Iterator<Item = &'a [bool]>) -> Option<f64> {
    let mut p_sum = 0.0;
    let mut n_items = 0usize;
    let mut yes_total = 0usize;
    let mut all_total = 0usize;
    for votes in items {
        let m = votes.len();
        if m < 2 {
            continue;
        }
        let yes = votes.iter().filter(|&&v| v).count();
        let no = m - yes;
        p_sum += (yes * yes.saturating_sub(1) + no * no.saturating_sub(1)) as f64 / (m * (m - 1)) as f64;
        n_items += 1;
        yes_total += yes;
        all_total += m;
    }
    if n_items == 0 {
        return None;
    }
    let p_bar = p_sum / n_items as f64;
    let p_yes = yes_total as f64 / all_total as f64;
    let p_e = p_yes * p_yes + (1.0 - p_yes) * (1.0 - p_yes);
    (p_e < 1.0).then(|| (p_bar - p_e) / (1.0 - p_e))
}

impl AgreementReport {
    /// Aligned text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<20} {:>17} {:>13} {:>8}",
            "Aspect", "Perfect agreement", "Disagreements", "Kappa"
        );
        for c in Characteristic::ALL {
            let rate = self.per_characteristic[c].map_or("-".to_string(), |r| format!("{r:.1}%"));
            let kappa = self.fleiss_kappa[c].map_or("-".to_string(), |k| format!("{k:.3}"));
            let _ = writeln!(
                out,
                "{:<20} {:>17} {:>13} {:>8}",
                c.title(),
                rate,
                self.disagreement_ids[c].len(),
                kappa
            );
        }
        let _ = writeln!(out, "instances: {}  excluded: {}", self.n_instances, self.excluded);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisagreementEntry {
    pub id: String,
    pub text: String,
    pub votes: Vec<bool>,
}

/// Non-unanimous instances for one characteristic, sorted by id.
pub fn disagreement_report(corpus: &Corpus, c: Characteristic) -> Vec<DisagreementEntry> {
    let mut out: Vec<_> = corpus
        .records()
        .iter()
        .filter(|r| r.annotator_count() >= 2 && !is_unanimous(&r.votes[c]))
        .map(|r| DisagreementEntry {
            id: r.id.clone(),
            text: r.text.clone(),
            votes: r.votes[c].clone(),
        })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Record;
    use proptest::prelude::*;

    fn corpus(vote_sets: &[&[bool]]) -> Corpus {
        Corpus::from_records(
            vote_sets
                .iter()
                .enumerate()
                .map(|(i, v)| Record {
                    id: format!("u{i}"),
                    text: "t".into(),
                    author_id: None,
                    source: None,
                    language: "en".into(),
                    votes: ByCharacteristic::from_fn(|_| v.to_vec()),
                    difficulty_votes: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn half_unanimous_is_fifty_percent() {
        let c = corpus(&[
            &[true, true, true],
            &[false, false, false],
            &[true, false, true],
            &[false, true, true],
        ]);
        let r = perfect_agreement(&c);
        assert_eq!(r.per_characteristic.emotionality, Some(50.0));
        assert_eq!(r.disagreement_ids.emotionality, ["u2", "u3"]);
    }

    #[test]
    fn all_unanimous_is_full_agreement() {
        let c = corpus(&[&[true, true, true], &[false, false, false]]);
        let r = perfect_agreement(&c);
        for (_, rate) in r.per_characteristic.iter() {
            assert_eq!(*rate, Some(100.0));
        }
    }

    #[test]
    fn single_annotator_records_are_excluded() {
        let c = corpus(&[&[true], &[true, false, false]]);
        let r = perfect_agreement(&c);
        assert_eq!(r.excluded, 1);
        assert_eq!(r.n_instances, 1);
        assert_eq!(r.per_characteristic.emotionality, Some(0.0));
    }

    #[test]
    fn empty_corpus_has_null_rates() {
        let r = perfect_agreement(&Corpus::default());
        assert_eq!(r.per_characteristic.emotionality, None);
    }

    #[test]
    fn majority_cases() {
        assert!(majority_vote(&[true, false, true]).unwrap());
        assert!(!majority_vote(&[false, false, false]).unwrap());
        assert!(majority_vote(&[true, true]).is_err());
        assert!(majority_label(&[true, true, true, false]).unwrap());
        assert!(majority_label(&[true, false]).is_err());
    }

    #[test]
    fn difficulty_cases() {
        assert_eq!(difficulty_of(&[true, true, false]), Difficulty::Difficult);
        assert_eq!(difficulty_of(&[true, false, false]), Difficulty::Easy);
        assert_eq!(difficulty_of(&[]), Difficulty::Unknown);
    }

    #[test]
    fn kappa_perfect_and_undefined() {
        let items: Vec<&[bool]> = vec![&[true, true, true], &[false, false, false]];
        assert_eq!(fleiss_kappa(items.into_iter()), Some(1.0));
        let items: Vec<&[bool]> = vec![&[true, true, true]];
        assert_eq!(fleiss_kappa(items.into_iter()), None);
    }

    #[test]
    fn disagreement_report_lists_split_votes() {
        let c = corpus(&[&[true, true, true], &[true, false, true]]);
        let d = disagreement_report(&c, Characteristic::SelfRevealing);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].votes, [true, false, true]);
        let c = corpus(&[&[true, true, true]]);
        assert!(disagreement_report(&c, Characteristic::Emotionality).is_empty());
    }

    proptest! {
        #[test]
        fn majority_is_permutation_invariant(mut votes in prop::collection::vec(any::<bool>(), 1..15usize).prop_filter("odd", |v| v.len() % 2 == 1), seed: u64) {
            use rand::seq::SliceRandom;
            let before = majority_vote(&votes).unwrap();
            votes.shuffle(&mut crate::rng::seeded(seed));
            prop_assert_eq!(majority_vote(&votes).unwrap(), before);
        }

        #[test]
        fn difficulty_is_monotone(votes in prop::collection::vec(any::<bool>(), 1..8usize)) {
            let before = difficulty_of(&votes);
            let mut more = votes.clone();
            more.push(true);
            if before == Difficulty::Difficult {
                prop_assert_eq!(difficulty_of(&more), Difficulty::Difficult);
            }
        }
    }
}
