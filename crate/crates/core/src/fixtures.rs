//! Small data sets shipped with the crate.

/// Seven example utterances in the corpus wire format. The third has split
/// emotionality votes.
pub const STYLE_EXAMPLES: &str = include_str!("../data/fixtures/style_examples.jsonl");

/// 100 three-annotator records whose unanimity counts are 53, 52, 63, 73
/// and 80 (in characteristic order).
pub const AGREEMENT_PROFILE: &str = include_str!("../data/fixtures/agreement_profile.jsonl");

/// 1,000 difficulty vote triples: 482 easy, 518 difficult.
pub const DIFFICULTY_VOTES: &str = include_str!("../data/fixtures/difficulty_votes.jsonl");

/// 50 conversations from `synthetic_conversations(50, 50)`.
pub const CONVERSATIONS: &str = include_str!("../data/fixtures/conversations.jsonl");

pub fn difficulty_votes() -> Vec<Vec<bool>> {
    DIFFICULTY_VOTES
        .lines()
        .map(|l| serde_json::from_str(l).expect("difficulty fixture"))
        .collect()
}
