use rand::seq::IndexedRandom;
use rand::Rng;

use super::{Conversation, Satisfaction, Speaker, Turn};
use crate::corpus::{generate_synthetic, MarkerPools};
use crate::{rng, Characteristic, Result};

const CLOSINGS: [&str; 8] = [
    "Thanks, that solved it!",
    "This is useless!",
    "ok",
    "Thank you so much.",
    "Ridiculous, I give up!",
    "Fine, bye.",
    "I appreciate the help.",
    "What a waste of time!",
];

const OPENERS: [&str; 4] = ["You are right.", "Your order is noted.", "We see the issue.", "Noted."];

const ASSURANCES: [&str; 4] = [
    "We recommend restarting the device.",
    "We can offer a replacement.",
    "I am sure this will work.",
    "Please check the settings page.",
];

fn reply<R: Rng>(rng: &mut R, pools: &MarkerPools) -> String {
    let mut parts = vec![OPENERS.choose(rng).unwrap().to_string()];
    if rng.random_bool(0.5) {
        parts.push(ASSURANCES.choose(rng).unwrap().to_string());
    }
    for c in [Characteristic::Emotionality, Characteristic::FactOriented] {
        if rng.random_bool(0.5) {
            let m = pools.markers[c].choose(rng).unwrap();
            parts.push(m.replace("{num}", &rng.random_range(2..99).to_string()));
        }
    }
    if rng.random_bool(0.25) {
        for _ in 0..12 {
            parts.push(pools.filler.choose(rng).unwrap().clone());
        }
    }
    parts.join(" ")
}

/// Random conversations for exercising the matching pipeline. User turns
/// are synthetic corpus utterances; some conversations end on a user turn
/// and some user turns get two agent replies.
pub fn synthetic_conversations(seed: u64, n: usize) -> Result<Vec<Conversation>> {
    let corpus = generate_synthetic(seed, (n * 4).max(10), 1.0)?;
    let texts: Vec<&str> = corpus.records().iter().map(|r| r.text.as_str()).collect();
    let pools = MarkerPools::bundled();
    let mut rng = rng::derived(seed, "conversations");
    let turn = |speaker, text: String| Turn { speaker, text };
    let satisfactions = [
        None,
        Some(Satisfaction::Satisfied),
        Some(Satisfaction::Neutral),
        Some(Satisfaction::Dissatisfied),
    ];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut turns = Vec::new();
        for _ in 0..rng.random_range(1..=4) {
            turns.push(turn(Speaker::User, texts.choose(&mut rng).unwrap().to_string()));
            if rng.random_bool(0.85) {
                turns.push(turn(Speaker::Agent, reply(&mut rng, pools)));
                if rng.random_bool(0.1) {
                    turns.push(turn(Speaker::Agent, reply(&mut rng, pools)));
                }
            }
        }
        if rng.random_bool(0.5) {
            turns.push(turn(Speaker::User, CLOSINGS.choose(&mut rng).unwrap().to_string()));
        }
        out.push(Conversation {
            id: format!("conv-{i:04}"),
            turns,
            satisfaction: *satisfactions.choose(&mut rng).unwrap(),
        });
    }
    Ok(out)
}
