use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Prf;
use crate::{ByCharacteristic, Characteristic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub model: String,
    pub scores: ByCharacteristic<Prf>,
}

/// Models × tasks × (P, R, F) comparison grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub rows: Vec<GridRow>,
}

impl Grid {
    /// Aligned table with scores as percentages.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<10}", "model");
        for c in Characteristic::ALL {
            let _ = write!(out, " | {:^20}", c.title());
        }
        out.push('\n');
        let _ = write!(out, "{:<10}", "");
        for _ in Characteristic::ALL {
            let _ = write!(out, " | {:>6} {:>6} {:>6}", "P", "R", "F");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<10}", row.model);
            for (_, s) in row.scores.iter() {
                let _ = write!(
                    out,
                    " | {:>6.1} {:>6.1} {:>6.1}",
                    100.0 * s.precision,
                    100.0 * s.recall,
                    100.0 * s.f1
                );
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,task,precision,recall,f1\n");
        for row in &self.rows {
            for (c, s) in row.scores.iter() {
                let _ = writeln!(out, "{},{},{:?},{:?},{:?}", row.model, c, s.precision, s.recall, s.f1);
            }
        }
        out
    }
}
