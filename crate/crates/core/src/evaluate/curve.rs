use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabeledText, NestedSample};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub train_size: usize,
    pub macro_f1: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
    /// Subsamples are nested: each smaller training set is contained in
    /// every larger one.
    pub nested: bool,
}

/// Trains on stratified subsamples of `pool` of each size and scores the
/// fixed `test` set. `trainer` receives the subsample and the test set and
/// returns test predictions.
pub fn learning_curve<F>(mut trainer: F, pool: &[LabeledText], test: &[LabeledText], sizes: &[usize], seed: u64) -> Result<LearningCurve>
where
    F: FnMut(&[LabeledText], &[LabeledText]) -> Result<Vec<bool>>,
{
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("no training sizes given".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "training sizes must be strictly increasing: {sizes:?}"
        )));
    }
    let max = *sizes.last().unwrap();
    if max > pool.len() {
        return Err(Error::InvalidConfig(format!("training size {max} exceeds pool of {}", pool.len())));
    }
    let sample = NestedSample::new(pool, |t| t.label, seed);
    let gold: Vec<bool> = test.iter().map(|t| t.label).collect();
    let mut points = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let subset: Vec<LabeledText> = sample.take(size).into_iter().map(|i| pool[i].clone()).collect();
        let preds = trainer(&subset, test)?;
        let f1 = super::macro_f1(&preds, &gold)?;
        log::info!("curve size {size}: macro-F1 {f1:.4}");
        points.push(CurvePoint {
            train_size: size,
            macro_f1: f1,
            seed,
        });
    }
    Ok(LearningCurve { points, nested: true })
}

impl LearningCurve {
    /// CSV with header `size,f1,seed`; floats in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("size,f1,seed\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{:?},{}", p.train_size, p.macro_f1, p.seed);
        }
        out
    }
}
