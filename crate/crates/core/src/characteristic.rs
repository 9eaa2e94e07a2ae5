use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the five psycholinguistic characteristics of an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    Emotionality,
    FactOriented,
    SelfRevealing,
    ActionSeeking,
    InformationSeeking,
}

impl Characteristic {
    pub const ALL: [Characteristic; 5] = [
        Characteristic::Emotionality,
        Characteristic::FactOriented,
        Characteristic::SelfRevealing,
        Characteristic::ActionSeeking,
        Characteristic::InformationSeeking,
    ];

    /// Wire key, as used in JSON objects and file names.
    pub fn key(self) -> &'static str {
        match self {
            Characteristic::Emotionality => "emotionality",
            Characteristic::FactOriented => "fact_oriented",
            Characteristic::SelfRevealing => "self_revealing",
            Characteristic::ActionSeeking => "action_seeking",
            Characteristic::InformationSeeking => "information_seeking",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Characteristic::Emotionality => "Emotionality",
            Characteristic::FactOriented => "Fact-oriented",
            Characteristic::SelfRevealing => "Self-revealing",
            Characteristic::ActionSeeking => "Action-seeking",
            Characteristic::InformationSeeking => "Information-seeking",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Characteristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Characteristic::ALL.into_iter().find(|c| c.key() == norm).ok_or_else(|| {
            format!(
                "unknown characteristic {s:?} (expected one of: {})",
                Characteristic::ALL.map(|c| c.key()).join(", ")
            )
        })
    }
}

/// A value for each of the five characteristics.
///
/// Serializes as a JSON object keyed by [`Characteristic::key`]; all five
/// keys are required when deserializing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByCharacteristic<T> {
    pub emotionality: T,
    pub fact_oriented: T,
    pub self_revealing: T,
    pub action_seeking: T,
    pub information_seeking: T,
}

impl<T> ByCharacteristic<T> {
    pub fn from_fn(mut f: impl FnMut(Characteristic) -> T) -> Self {
        ByCharacteristic {
            emotionality: f(Characteristic::Emotionality),
            fact_oriented: f(Characteristic::FactOriented),
            self_revealing: f(Characteristic::SelfRevealing),
            action_seeking: f(Characteristic::ActionSeeking),
            information_seeking: f(Characteristic::InformationSeeking),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Characteristic, &T) -> U) -> ByCharacteristic<U> {
        ByCharacteristic::from_fn(|c| f(c, &self[c]))
    }

    pub fn try_map<U, E>(&self, mut f: impl FnMut(Characteristic, &T) -> Result<U, E>) -> Result<ByCharacteristic<U>, E> {
        Ok(ByCharacteristic {
            emotionality: f(Characteristic::Emotionality, &self.emotionality)?,
            fact_oriented: f(Characteristic::FactOriented, &self.fact_oriented)?,
            self_revealing: f(Characteristic::SelfRevealing, &self.self_revealing)?,
            action_seeking: f(Characteristic::ActionSeeking, &self.action_seeking)?,
            information_seeking: f(Characteristic::InformationSeeking, &self.information_seeking)?,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (Characteristic, &T)> {
        Characteristic::ALL.into_iter().map(move |c| (c, &self[c]))
    }
}

impl<T> Index<Characteristic> for ByCharacteristic<T> {
    type Output = T;

    fn index(&self, c: Characteristic) -> &T {
        match c.index() {
            0 => &self.emotionality,
            1 => &self.fact_oriented,
            2 => &self.self_revealing,
            3 => &self.action_seeking,
            _ => &self.information_seeking,
        }
    }
}

impl<T> IndexMut<Characteristic> for ByCharacteristic<T> {
    fn index_mut(&mut self, c: Characteristic) -> &mut T {
        match c.index() {
            0 => &mut self.emotionality,
            1 => &mut self.fact_oriented,
            2 => &mut self.self_revealing,
            3 => &mut self.action_seeking,
            _ => &mut self.information_seeking,
        }
    }
}
