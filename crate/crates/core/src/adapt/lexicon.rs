use std::collections::BTreeSet;
use std::path::Path;

use crate::featurize::tokenize;
use crate::{Error, Result};

/// A word list: one token per line, `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    words: BTreeSet<String>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let entry = line.split('#').next().unwrap_or_default().trim();
            if entry.is_empty() {
                continue;
            }
            let toks = tokenize(entry);
            if toks.len() != 1 {
                return Err(Error::Format {
                    line: i + 1,
                    message: format!("{entry:?} is not a single token"),
                });
            }
            words.insert(toks.into_iter().next().unwrap());
        }
        Ok(Lexicon { words })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Self {
        Lexicon {
            words: words.iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    /// True when any token of `text` is in the list.
    pub fn hits(&self, text: &str) -> bool {
        tokenize(text).iter().any(|t| self.words.contains(t))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicons {
    pub second_person: Lexicon,
    pub assurance: Lexicon,
    pub gratitude: Lexicon,
    pub anger: Lexicon,
}

const FILES: [&str; 4] = ["second_person.txt", "assurance.txt", "gratitude.txt", "anger.txt"];

impl Lexicons {
    /// The word lists shipped with the crate.
    pub fn bundled() -> Self {
        let p = |s: &str| Lexicon::parse(s).expect("bundled lexicon parses");
        Lexicons {
            second_person: p(include_str!("../../data/lexicons/second_person.txt")),
            assurance: p(include_str!("../../data/lexicons/assurance.txt")),
            gratitude: p(include_str!("../../data/lexicons/gratitude.txt")),
            anger: p(include_str!("../../data/lexicons/anger.txt")),
        }
    }

    /// Loads the four lists from `dir`, using the bundled list for any
    /// file that is absent.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut out = Self::bundled();
        for (name, slot) in FILES
            .iter()
            .zip([&mut out.second_person, &mut out.assurance, &mut out.gratitude, &mut out.anger])
        {
            let path = dir.join(name);
            if path.exists() {
                *slot = Lexicon::load(path)?;
            }
        }
        Ok(out)
    }
}
