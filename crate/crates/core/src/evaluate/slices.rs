use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_LENGTH_THRESHOLD: usize = 40;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SliceCounts {
    pub n: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// FP over gold-negative instances in the slice.
    pub fp_rate: Option<f64>,
    /// FN over gold-positive instances in the slice.
    pub fn_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceTable {
    pub threshold_words: usize,
    /// Texts of at most `threshold_words` words.
    pub short: SliceCounts,
    pub long: SliceCounts,
}

/// False positives and negatives split by text length in words.
pub fn error_slices(predictions: &[bool], gold: &[bool], texts: &[&str], threshold_words: usize) -> Result<SliceTable> {
    if predictions.len() != gold.len() || gold.len() != texts.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            actual: predictions.len().max(texts.len()),
        });
    }
    let mut acc = [(0usize, 0usize, 0usize, 0usize, 0usize); 2];
    for ((&p, &g), t) in predictions.iter().zip(gold).zip(texts) {
        let slot = &mut acc[(t.split_whitespace().count() > threshold_words) as usize];
        slot.0 += 1;
        if g {
            slot.2 += 1;
            slot.4 += !p as usize;
        } else {
            slot.1 += 1;
            slot.3 += p as usize;
        }
    }
    let counts = |(n, neg, pos, fp, fn_): (usize, usize, usize, usize, usize)| SliceCounts {
        n,
        false_positives: fp,
        false_negatives: fn_,
        fp_rate: (neg > 0).then(|| fp as f64 / neg as f64),
        fn_rate: (pos > 0).then(|| fn_ as f64 / pos as f64),
    };
    Ok(SliceTable {
        threshold_words,
        short: counts(acc[0]),
        long: counts(acc[1]),
    })
}
