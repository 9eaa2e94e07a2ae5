//! Psycholinguistic profiling of short texts.
//!
//! Five binary characteristics (emotionality, fact-oriented, self-revealing,
//! action-seeking, information-seeking) are annotated, learned and served:
//!
//! - [`corpus`]: annotated utterances, gold-label derivation, splits and a
//!   synthetic corpus generator.
//! - [`agreement`]: inter-annotator agreement analytics.
//! - [`featurize`]: tokenization, n-grams and TF-IDF vectors.
//! - [`linear`]: hinge-loss linear classifier with sigmoid calibration.
//! - [`neural`]: character CNN and recurrent-attention classifiers with
//!   hand-written backpropagation.
//! - [`evaluate`]: macro-averaged metrics, learning curves, calibration
//!   bands and error slices.
//! - [`adapt`]: per-utterance profiles, response-style directives and
//!   conversation-level matching.

pub mod adapt;
pub mod agreement;
pub mod bundle;
pub mod characteristic;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod featurize;
pub mod fixtures;
pub mod linear;
pub mod model;
pub mod neural;
pub mod rng;

pub use characteristic::{ByCharacteristic, Characteristic};
pub use error::{Error, Result};

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}
