//! Per-utterance profiles, response-style directives, reply checks and
//! conversation-level matching.

mod association;
mod lexicon;
mod synth;

pub use association::{association, average_ranks, spearman, Association};
pub use lexicon::{Lexicon, Lexicons};
pub use synth::synthetic_conversations;

use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::{ByCharacteristic, Characteristic, Error, Result};

pub const DEFAULT_CONCISE_WORDS: usize = 40;

/// Version tag of the matching predicates below.
pub const PREDICATES_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicProfile {
    pub labels: ByCharacteristic<bool>,
    pub probabilities: ByCharacteristic<f64>,
    pub fingerprints: ByCharacteristic<String>,
}

impl CharacteristicProfile {
    pub fn from_probabilities(probabilities: ByCharacteristic<f64>, fingerprints: ByCharacteristic<String>) -> Self {
        CharacteristicProfile {
            labels: probabilities.map(|_, &p| p >= 0.5),
            probabilities,
            fingerprints,
        }
    }
}

pub fn profile(text: &str, bundle: &ModelBundle) -> Result<CharacteristicProfile> {
    let probabilities = ByCharacteristic::from_fn(|c| c).try_map(|_, &c| bundle.get(c).prob_yes(text))?;
    Ok(CharacteristicProfile::from_probabilities(probabilities, bundle.fingerprints()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectiveKind {
    MirrorEmotionality { target: bool },
    SecondPersonAcknowledgement,
    ConciseFactual,
    AssuranceWords,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Directive {
    #[serde(flatten)]
    pub kind: DirectiveKind,
    pub triggered_by: Characteristic,
}

/// Mirror emotionality always; acknowledge self-revelation; stay short and
/// factual for fact-oriented users; reassure action or information seekers.
pub fn directives_for(labels: &ByCharacteristic<bool>) -> Vec<Directive> {
    use Characteristic::*;
    let mut out = vec![Directive {
        kind: DirectiveKind::MirrorEmotionality {
            target: labels.emotionality,
        },
        triggered_by: Emotionality,
    }];
    if labels.self_revealing {
        out.push(Directive {
            kind: DirectiveKind::SecondPersonAcknowledgement,
            triggered_by: SelfRevealing,
        });
    }
    if labels.fact_oriented {
        out.push(Directive {
            kind: DirectiveKind::ConciseFactual,
            triggered_by: FactOriented,
        });
    }
    if labels.action_seeking || labels.information_seeking {
        let by = if labels.action_seeking { ActionSeeking } else { InformationSeeking };
        out.push(Directive {
            kind: DirectiveKind::AssuranceWords,
            triggered_by: by,
        });
    }
    out
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    #[default]
    User,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Satisfaction {
    Satisfied,
    Neutral,
    Dissatisfied,
    #[default]
    Unset,
}

impl Satisfaction {
    /// Dissatisfied 0, neutral 1, satisfied 2.
    pub fn ordinal(self) -> Option<usize> {
        match self {
            Satisfaction::Dissatisfied => Some(0),
            Satisfaction::Neutral => Some(1),
            Satisfaction::Satisfied => Some(2),
            Satisfaction::Unset => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Conversation {
    pub id: String,
    pub turns: Vec<Turn>,
    #[serde(default)]
    pub satisfaction: Option<Satisfaction>,
}

impl Conversation {
    pub fn satisfaction(&self) -> Satisfaction {
        self.satisfaction.unwrap_or_default()
    }

    /// The first turn must come from the user.
    pub fn validate(&self) -> Result<()> {
        match self.turns.first() {
            None => Err(Error::EmptyInput(format!("conversation {:?} has no turns", self.id))),
            Some(t) if t.speaker != Speaker::User => Err(Error::Schema {
                line: 1,
                message: format!("conversation {:?} must start with a user turn", self.id),
            }),
            Some(_) => Ok(()),
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let c: Conversation = serde_json::from_str(json)?;
        c.validate()?;
        Ok(c)
    }
}

/// One conversation per line.
pub fn parse_conversations_jsonl(input: &str) -> Result<Vec<Conversation>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let c = Conversation::from_json(line).map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(c);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    pub detected: usize,
    pub matched: usize,
    pub matching_level: Option<f64>,
}

impl MatchingReport {
    pub fn new(detected: usize, matched: usize) -> Self {
        MatchingReport {
            detected,
            matched,
            matching_level: (detected > 0).then(|| 100.0 * matched as f64 / detected as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub directive: Directive,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnReport {
    pub speaker: Speaker,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<CharacteristicProfile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub directives: Option<Vec<Directive>>,
    /// Index of the user turn these verdicts answer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub responds_to: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Vec<Verdict>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversationReport {
    pub id: String,
    pub turns: Vec<TurnReport>,
    pub matching: MatchingReport,
    pub satisfaction_heuristic: Satisfaction,
    pub satisfaction: Satisfaction,
    pub warnings: Vec<String>,
}

/// Models, lexicons and the conciseness threshold.
#[derive(Debug, Clone)]
pub struct Adapter {
    pub bundle: ModelBundle,
    pub lexicons: Lexicons,
    pub concise_words: usize,
}

impl Adapter {
    pub fn new(bundle: ModelBundle, lexicons: Lexicons) -> Self {
        Adapter {
            bundle,
            lexicons,
            concise_words: DEFAULT_CONCISE_WORDS,
        }
    }

    pub fn profile(&self, text: &str) -> Result<CharacteristicProfile> {
        profile(text, &self.bundle)
    }

    pub fn check_match(&self, directive: &Directive, reply: &str) -> Result<bool> {
        let model = |c: Characteristic| self.bundle.get(c).predict(reply);
        Ok(match directive.kind {
            DirectiveKind::MirrorEmotionality { target } => model(Characteristic::Emotionality)? == target,
            DirectiveKind::SecondPersonAcknowledgement => self.lexicons.second_person.hits(reply),
            DirectiveKind::ConciseFactual => word_count(reply) <= self.concise_words && model(Characteristic::FactOriented)?,
            DirectiveKind::AssuranceWords => self.lexicons.assurance.hits(reply),
        })
    }

    /// Label from the final user turn only.
    pub fn satisfaction_heuristic(&self, conversation: &Conversation) -> Result<Satisfaction> {
        let last = conversation
            .turns
            .iter()
            .rev()
            .find(|t| t.speaker == Speaker::User)
            .ok_or_else(|| Error::EmptyInput(format!("conversation {:?} has no user turn", conversation.id)))?;
        if self.lexicons.gratitude.hits(&last.text) {
            return Ok(Satisfaction::Satisfied);
        }
        if self.lexicons.anger.hits(&last.text) && self.bundle.get(Characteristic::Emotionality).predict(&last.text)? {
            return Ok(Satisfaction::Dissatisfied);
        }
        Ok(Satisfaction::Neutral)
    }

    pub fn matching_level(&self, conversation: &Conversation) -> Result<MatchingReport> {
        Ok(self.adapt(conversation)?.matching)
    }

    /// Profiles every user turn, checks its directives against the next
    /// agent turn and scores the conversation.
    pub fn adapt(&self, conversation: &Conversation) -> Result<ConversationReport> {
        conversation.validate()?;
        let mut turns = Vec::with_capacity(conversation.turns.len());
        let mut warnings = Vec::new();
        let mut pending: Option<(usize, Vec<Directive>)> = None;
        let (mut detected, mut matched) = (0, 0);
        for (i, turn) in conversation.turns.iter().enumerate() {
            let mut report = TurnReport {
                speaker: turn.speaker,
                text: turn.text.clone(),
                profile: None,
                directives: None,
                responds_to: None,
                verdicts: None,
            };
            match turn.speaker {
                Speaker::User => {
                    if let Some((j, _)) = pending.take() {
                        warnings.push(format!("turn {j}: user turn has no agent reply; its directives are not scored"));
                    }
                    let p = self.profile(&turn.text)?;
                    let d = directives_for(&p.labels);
                    pending = Some((i, d.clone()));
                    report.profile = Some(p);
                    report.directives = Some(d);
                }
                Speaker::Agent => {
                    if let Some((j, directives)) = pending.take() {
                        let verdicts = directives
                            .into_iter()
                            .map(|d| {
                                Ok(Verdict {
                                    directive: d,
                                    matched: self.check_match(&d, &turn.text)?,
                                })
                            })
                            .collect::<Result<Vec<_>>>()?;
                        detected += verdicts.len();
                        matched += verdicts.iter().filter(|v| v.matched).count();
                        report.responds_to = Some(j);
                        report.verdicts = Some(verdicts);
                    }
                }
            }
            turns.push(report);
        }
        if let Some((j, _)) = pending {
            warnings.push(format!("turn {j}: conversation ends on a user turn; its directives are not scored"));
        }
        for w in &warnings {
            log::warn!("conversation {:?}, {w}", conversation.id);
        }
        Ok(ConversationReport {
            id: conversation.id.clone(),
            turns,
            matching: MatchingReport::new(detected, matched),
            satisfaction_heuristic: self.satisfaction_heuristic(conversation)?,
            satisfaction: conversation.satisfaction(),
            warnings,
        })
    }
}
