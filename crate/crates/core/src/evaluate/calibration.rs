use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Difficulty;
use crate::{Error, Result};

/// Closed probability interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub const DEFAULTS: [Band; 2] = [Band { lo: 0.85, hi: 0.99 }, Band { lo: 0.40, hi: 0.60 }];

    pub fn contains(&self, p: f64) -> bool {
        self.lo <= p && p <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCell {
    pub difficulty: Difficulty,
    pub gold: bool,
    pub count: usize,
    /// Per band, fraction of the cell whose no-class probability falls in
    /// it; `None` for an empty cell.
    pub fractions: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bands: Vec<Band>,
    /// Cells in the order (easy, no), (easy, yes), (difficult, no), (difficult, yes).
    pub cells: Vec<CalibrationCell>,
    /// Instances without a difficulty label, left out of every cell.
    pub excluded_unknown: usize,
}

/// Band fractions of `p_no` (the no-class probability) per
/// difficulty × gold cell.
pub fn calibration_report(p_no: &[f64], gold: &[bool], difficulty: &[Difficulty], bands: &[Band]) -> Result<CalibrationReport> {
    if p_no.len() != gold.len() || gold.len() != difficulty.len() {
        return Err(Error::DimensionMismatch {
            expected: gold.len(),
            actual: p_no.len().max(difficulty.len()),
        });
    }
    if let Some(p) = p_no.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Calibration(format!("probability {p} outside [0, 1]")));
    }
    let mut cells = Vec::with_capacity(4);
    for d in [Difficulty::Easy, Difficulty::Difficult] {
        for g in [false, true] {
            let mut count = 0;
            let mut hits = vec![0usize; bands.len()];
            for ((p, &gg), &dd) in p_no.iter().zip(gold).zip(difficulty) {
                if dd != d || gg != g {
                    continue;
                }
                count += 1;
                for (h, b) in hits.iter_mut().zip(bands) {
                    if b.contains(*p) {
                        *h += 1;
                    }
                }
            }
            let fractions = hits.iter().map(|&h| (count > 0).then(|| h as f64 / count as f64)).collect();
            cells.push(CalibrationCell {
                difficulty: d,
                gold: g,
                count,
                fractions,
            });
        }
    }
    Ok(CalibrationReport {
        bands: bands.to_vec(),
        cells,
        excluded_unknown: difficulty.iter().filter(|d| **d == Difficulty::Unknown).count(),
    })
}

impl CalibrationReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<10} {:<5} {:>6}", "difficulty", "gold", "n");
        for b in &self.bands {
            let _ = write!(out, " {:>12}", format!("[{:.2},{:.2}]", b.lo, b.hi));
        }
        out.push('\n');
        for c in &self.cells {
            let d = match c.difficulty {
                Difficulty::Easy => "easy",
                Difficulty::Difficult => "difficult",
                Difficulty::Unknown => "unknown",
            };
            let _ = write!(out, "{:<10} {:<5} {:>6}", d, if c.gold { "yes" } else { "no" }, c.count);
            for f in &c.fractions {
                let cell = f.map_or("-".to_string(), |v| format!("{:.1}%", 100.0 * v));
                let _ = write!(out, " {cell:>12}");
            }
            out.push('\n');
        }
        out
    }
}
