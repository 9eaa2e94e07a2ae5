use serde::{Deserialize, Serialize};

use super::Satisfaction;
use crate::{Error, Result};

/// Satisfaction × matching-level tercile counts plus Spearman's rho.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub n: usize,
    /// `None` when either side is constant.
    pub spearman: Option<f64>,
    /// Rows: dissatisfied, neutral, satisfied. Columns: matching level in
    /// `[0, 100/3)`, `[100/3, 200/3)`, `[200/3, 100]`.
    pub contingency: [[usize; 3]; 3],
    /// Pairs skipped for a null matching level or unset satisfaction.
    pub excluded: usize,
}

/// Ranks starting at 1; ties get the mean of the positions they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho as the Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

fn tercile(level: f64) -> usize {
    if level < 100.0 / 3.0 {
        0
    } else if level < 200.0 / 3.0 {
        1
    } else {
        2
    }
}

pub fn association(batch: &[(Option<f64>, Satisfaction)]) -> Result<Association> {
    let pairs: Vec<(f64, usize)> = batch.iter().filter_map(|(level, s)| Some(((*level)?, s.ordinal()?))).collect();
    if pairs.len() < 5 {
        return Err(Error::EmptyInput(format!(
            "association needs at least 5 conversations with a matching level and satisfaction, got {}",
            pairs.len()
        )));
    }
    let mut contingency = [[0usize; 3]; 3];
    for &(level, s) in &pairs {
        contingency[s][tercile(level)] += 1;
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
    Ok(Association {
        n: pairs.len(),
        spearman: spearman(&x, &y),
        contingency,
        excluded: batch.len() - pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), [2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn monotone_batches() {
        let s = [Satisfaction::Dissatisfied, Satisfaction::Neutral, Satisfaction::Satisfied];
        let up: Vec<_> = (0..6).map(|i| (Some((i / 2) as f64 * 40.0), s[i / 2])).collect();
        let a = association(&up).unwrap();
        assert_eq!(a.spearman, Some(1.0));
        assert_eq!(a.contingency, [[2, 0, 0], [0, 2, 0], [0, 0, 2]]);
        let down: Vec<_> = (0..6).map(|i| (Some(100.0 - (i / 2) as f64 * 40.0), s[i / 2])).collect();
        assert_eq!(association(&down).unwrap().spearman, Some(-1.0));
    }

    #[test]
    fn constant_side_is_null_and_small_batches_fail() {
        let b: Vec<_> = (0..6).map(|i| (Some(i as f64), Satisfaction::Neutral)).collect();
        assert_eq!(association(&b).unwrap().spearman, None);
        assert!(association(&b[..4]).is_err());
    }

    /// Brute force: rank by counting, then the textbook Pearson formula.
    fn oracle(x: &[f64], y: &[f64]) -> f64 {
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|a| {
                    let less = v.iter().filter(|b| *b < a).count() as f64;
                    let eq = v.iter().filter(|b| *b == a).count() as f64;
                    less + (eq + 1.0) / 2.0
                })
                .collect()
        };
        let (rx, ry) = (rank(x), rank(y));
        let n = x.len() as f64;
        let sx: f64 = rx.iter().sum();
        let sy: f64 = ry.iter().sum();
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| a * b).sum();
        let sxx: f64 = rx.iter().map(|a| a * a).sum();
        let syy: f64 = ry.iter().map(|a| a * a).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn matches_rank_oracle() {
        let mut rng = crate::rng::seeded(5);
        let x: Vec<f64> = (0..200).map(|_| (rng.random_range(0..40) as f64) * 2.5).collect();
        let y: Vec<f64> = (0..200).map(|_| rng.random_range(0..3) as f64).collect();
        assert!((spearman(&x, &y).unwrap() - oracle(&x, &y)).abs() < 1e-9);
    }
}
