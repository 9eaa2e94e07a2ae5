//! Text to sparse TF-IDF vectors: tokenization, word and character
//! n-grams, vocabulary selection and weighting.

mod sparse;
mod vocab;

pub use sparse::SparseVector;
pub use vocab::{corpus_fingerprint, FeatureKind, VocabConfig, VocabEntry, Vocabulary, TFIDF_FORMULA};

/// Marks word boundaries in character n-grams. Stripped from input text, so
/// it never occurs inside a word.
pub const BOUNDARY: char = '\u{E000}';

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercased tokens. Whitespace separates tokens; runs of alphanumerics
/// (with inner apostrophes, as in "here's") form words and every other
/// character stands alone.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lower.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut word = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let inner_apostrophe = is_apostrophe(c) && !word.is_empty() && chars.get(i + 1).is_some_and(|&n| is_word_char(n));
            if is_word_char(c) || inner_apostrophe {
                word.push(c);
            } else {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
    }
    tokens
}

/// Word n-grams of the given orders, in reading order within each order
/// (all unigrams, then all bigrams, ...). Grams are space-joined.
pub fn word_ngrams(tokens: &[String], orders: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    for &n in orders {
        if n == 0 || n > tokens.len() {
            continue;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

/// Character n-grams over each whitespace-delimited word wrapped in
/// [`BOUNDARY`] on both sides. Works on Unicode scalar values.
pub fn char_ngrams(text: &str, orders: &[usize], lowercase: bool) -> Vec<String> {
    let normalized: String = text.chars().filter(|&c| c != BOUNDARY).collect();
    let normalized = if lowercase { normalized.to_lowercase() } else { normalized };
    let mut out = Vec::new();
    for word in normalized.split_whitespace() {
        let wrapped: Vec<char> = std::iter::once(BOUNDARY)
            .chain(word.chars())
            .chain(std::iter::once(BOUNDARY))
            .collect();
        for &n in orders {
            if n == 0 || n > wrapped.len() {
                continue;
            }
            out.extend(wrapped.windows(n).map(|w| w.iter().collect::<String>()));
        }
    }
    out
}
