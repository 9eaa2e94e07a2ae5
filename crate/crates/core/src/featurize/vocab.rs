use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{char_ngrams, tokenize, word_ngrams, SparseVector};
use crate::{sha256_hex, Error, Result};

/// Weighting recorded in every serialized vocabulary.
pub const TFIDF_FORMULA: &str = "tf=raw;idf=ln((1+N)/(1+df))+1;norm=l2";

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    WordNgram,
    CharNgram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabConfig {
    pub word_orders: Vec<usize>,
    pub char_orders: Vec<usize>,
    pub top_k_word: usize,
    pub top_k_char: usize,
    pub min_df: usize,
    /// Lowercase before extracting character n-grams. Word n-grams are
    /// always lowercased by the tokenizer.
    pub lowercase_chars: bool,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            word_orders: vec![1, 2],
            char_orders: vec![3, 4, 5],
            top_k_word: 20_000,
            top_k_char: 20_000,
            min_df: 2,
            lowercase_chars: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub feature: String,
    pub kind: FeatureKind,
    pub df: usize,
    pub idf: f64,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    format_version: u32,
    formula: String,
    config: VocabConfig,
    n_docs: usize,
    corpus_fingerprint: String,
    entries: Vec<VocabEntry>,
}

/// Selected n-gram features with their inverse document frequencies.
/// Word entries come first, then character entries, each sorted
/// lexicographically; an entry's position is its vector index.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    pub config: VocabConfig,
    pub n_docs: usize,
    pub corpus_fingerprint: String,
    entries: Vec<VocabEntry>,
    index: HashMap<(FeatureKind, String), u32>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.n_docs == other.n_docs
            && self.corpus_fingerprint == other.corpus_fingerprint
            && self.entries == other.entries
    }
}

fn features(text: &str, config: &VocabConfig) -> (Vec<String>, Vec<String>) {
    let words = word_ngrams(&tokenize(text), &config.word_orders);
    let chars = char_ngrams(text, &config.char_orders, config.lowercase_chars);
    (words, chars)
}

fn top_k(df: HashMap<String, usize>, k: usize, min_df: usize) -> Vec<(String, usize)> {
    let mut kept: Vec<(String, usize)> = df.into_iter().filter(|(_, d)| *d >= min_df).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    kept.truncate(k);
    kept.sort_by(|a, b| a.0.cmp(&b.0));
    kept
}

/// Order-independent fingerprint of a document collection.
pub fn corpus_fingerprint<S: AsRef<str>>(docs: &[S]) -> String {
    let mut hashes: Vec<String> = docs.iter().map(|d| sha256_hex(d.as_ref().as_bytes())).collect();
    hashes.sort();
    sha256_hex(hashes.join("\n").as_bytes())
}

impl Vocabulary {
    /// Count document frequencies, drop features below `min_df` and keep the
    /// `top_k` most frequent per kind (ties broken lexicographically).
    pub fn build<S: AsRef<str>>(docs: &[S], config: VocabConfig) -> Result<Self> {
        if docs.len() < 2 {
            return Err(Error::EmptyInput(format!(
                "vocabulary needs at least 2 documents, got {}",
                docs.len()
            )));
        }
        let mut word_df: HashMap<String, usize> = HashMap::new();
        let mut char_df: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            let (words, chars) = features(doc.as_ref(), &config);
            for f in words.into_iter().collect::<HashSet<_>>() {
                *word_df.entry(f).or_default() += 1;
            }
            for f in chars.into_iter().collect::<HashSet<_>>() {
                *char_df.entry(f).or_default() += 1;
            }
        }
        let n = docs.len();
        let idf = |df: usize| ((1.0 + n as f64) / (1.0 + df as f64)).ln() + 1.0;
        let entries: Vec<VocabEntry> = top_k(word_df, config.top_k_word, config.min_df)
            .into_iter()
            .map(|(f, d)| (FeatureKind::WordNgram, f, d))
            .chain(
                top_k(char_df, config.top_k_char, config.min_df)
                    .into_iter()
                    .map(|(f, d)| (FeatureKind::CharNgram, f, d)),
            )
            .map(|(kind, feature, df)| VocabEntry {
                feature,
                kind,
                df,
                idf: idf(df),
            })
            .collect();
        Ok(Self::from_parts(config, n, corpus_fingerprint(docs), entries))
    }

    fn from_parts(config: VocabConfig, n_docs: usize, corpus_fingerprint: String, entries: Vec<VocabEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.kind, e.feature.clone()), i as u32))
            .collect();
        Vocabulary {
            config,
            n_docs,
            corpus_fingerprint,
            entries,
            index,
        }
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn lookup(&self, kind: FeatureKind, feature: &str) -> Option<usize> {
        self.index.get(&(kind, feature.to_string())).map(|&i| i as usize)
    }

    /// Raw term count times idf, L2-normalized. Unknown features are dropped.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        let (words, chars) = features(text, &self.config);
        let mut counts: HashMap<u32, f64> = HashMap::new();
        let kinds = [(FeatureKind::WordNgram, words), (FeatureKind::CharNgram, chars)];
        for (kind, feats) in kinds {
            for f in feats {
                if let Some(&i) = self.index.get(&(kind, f)) {
                    *counts.entry(i).or_default() += 1.0;
                }
            }
        }
        let pairs = counts.into_iter().map(|(i, tf)| (i, tf * self.entries[i as usize].idf)).collect();
        let mut v = SparseVector::from_pairs(self.dim(), pairs);
        let norm = v.norm();
        if norm > 0.0 {
            v.scale(1.0 / norm);
        }
        v
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabFile {
            format_version: FORMAT_VERSION,
            formula: TFIDF_FORMULA.to_string(),
            config: self.config.clone(),
            n_docs: self.n_docs,
            corpus_fingerprint: self.corpus_fingerprint.clone(),
            entries: self.entries.clone(),
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(json)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Container(format!("unsupported vocabulary version {}", file.format_version)));
        }
        if file.formula != TFIDF_FORMULA {
            return Err(Error::Container(format!(
                "vocabulary uses weighting {:?}, expected {TFIDF_FORMULA:?}",
                file.formula
            )));
        }
        let mut seen = HashSet::new();
        for e in &file.entries {
            if !seen.insert((e.kind, e.feature.as_str())) || !e.idf.is_finite() {
                return Err(Error::Container(format!("bad vocabulary entry {:?}", e.feature)));
            }
        }
        Ok(Self::from_parts(file.config, file.n_docs, file.corpus_fingerprint, file.entries))
    }

    /// Hash of the serialized vocabulary, including the weighting formula.
    pub fn fingerprint(&self) -> String {
        sha256_hex(self.to_json().as_bytes())
    }
}
