//! Evaluation: macro-averaged precision/recall/F1, the majority-class
//! baseline, learning curves, probability-band calibration tables and
//! length-based error slices.

mod calibration;
mod curve;
mod grid;
mod slices;

pub use calibration::{calibration_report, Band, CalibrationCell, CalibrationReport};
pub use curve::{learning_curve, CurvePoint, LearningCurve};
pub use grid::{Grid, GridRow};
pub use slices::{error_slices, SliceCounts, SliceTable, DEFAULT_LENGTH_THRESHOLD};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub no: ClassMetrics,
    pub yes: ClassMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: PerClass,
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
    /// Counts indexed `[gold][predicted]`, index 0 = no, 1 = yes.
    pub confusion: [[usize; 2]; 2],
    pub n: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: tp + fn_,
    }
}

/// Per-class and macro-averaged metrics. Empty denominators give 0.
pub fn macro_prf(predictions: &[bool], gold: &[bool]) -> Result<EvalReport> {
    if predictions.len() != gold.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            actual: predictions.len(),
        });
    }
    if gold.is_empty() {
        return Err(Error::EmptyInput("no predictions to evaluate".into()));
    }
    let mut confusion = [[0usize; 2]; 2];
    for (&p, &g) in predictions.iter().zip(gold) {
        confusion[g as usize][p as usize] += 1;
    }
    let [[tn, fp], [fn_, tp]] = confusion;
    let yes = class_metrics(tp, fp, fn_);
    let no = class_metrics(tn, fn_, fp);
    Ok(EvalReport {
        per_class: PerClass { no, yes },
        macro_avg: Prf {
            precision: (no.precision + yes.precision) / 2.0,
            recall: (no.recall + yes.recall) / 2.0,
            f1: (no.f1 + yes.f1) / 2.0,
        },
        confusion,
        n: gold.len(),
    })
}

/// Macro F1 of `predictions` against `gold`.
pub fn macro_f1(predictions: &[bool], gold: &[bool]) -> Result<f64> {
    Ok(macro_prf(predictions, gold)?.macro_avg.f1)
}

/// The more frequent gold class; `no` on a tie.
pub fn majority_class(gold: &[bool]) -> bool {
    let yes = gold.iter().filter(|&&g| g).count();
    yes * 2 > gold.len()
}

/// Scores the constant predictor of the majority gold class.
pub fn majority_baseline(gold: &[bool]) -> Result<EvalReport> {
    let label = majority_class(gold);
    macro_prf(&vec![label; gold.len()], gold)
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<6} {:>9} {:>9} {:>9} {:>8}",
            "class", "precision", "recall", "f1", "support"
        );
        for (name, m) in [("no", self.per_class.no), ("yes", self.per_class.yes)] {
            let _ = writeln!(
                out,
                "{:<6} {:>9.4} {:>9.4} {:>9.4} {:>8}",
                name, m.precision, m.recall, m.f1, m.support
            );
        }
        let m = self.macro_avg;
        let _ = writeln!(
            out,
            "{:<6} {:>9.4} {:>9.4} {:>9.4} {:>8}",
            "macro", m.precision, m.recall, m.f1, self.n
        );
        let c = self.confusion;
        let _ = writeln!(
            out,
            "confusion (gold x pred): no=[{} {}] yes=[{} {}]",
            c[0][0], c[0][1], c[1][0], c[1][1]
        );
        out
    }
}
