//! Linear max-margin classifier over sparse TF-IDF vectors.
//!
//! Training minimizes `0.5 * |w|^2 + C * sum_i hinge(y_i * (w.x_i + b))` with
//! epoch-shuffled stochastic subgradient steps of size `1 / (lambda * t)`,
//! where `lambda = 1 / (C * n)` (the Pegasos schedule). The bias is not
//! regularized. Margins are mapped to probabilities by a fitted sigmoid.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::featurize::SparseVector;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearConfig {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            c: 1.0,
            epochs: 20,
            seed: 0,
        }
    }
}

/// `P(yes | margin) = sigmoid(a * margin + b)`, with `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub a: f64,
    pub b: f64,
}

impl Calibration {
    pub const IDENTITY: Calibration = Calibration { a: 1.0, b: 0.0 };

    pub fn probability(&self, margin: f64) -> f64 {
        sigmoid(self.a * margin + self.b)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub calibration: Calibration,
    pub config: LinearConfig,
    /// Primal objective after each epoch.
    pub objective_log: Vec<f64>,
}

fn label_sign(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}

fn check_dims(data: &[(SparseVector, bool)]) -> Result<usize> {
    let dim = data.first().map_or(0, |(x, _)| x.dim);
    for (x, _) in data {
        if x.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: x.dim,
            });
        }
    }
    Ok(dim)
}

pub fn train_linear(data: &[(SparseVector, bool)], config: &LinearConfig) -> Result<LinearModel> {
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(Error::InvalidConfig(format!("C must be positive, got {}", config.c)));
    }
    let yes = data.iter().filter(|d| d.1).count();
    if yes == 0 || yes == data.len() {
        return Err(Error::DegenerateTraining(format!(
            "need both classes, got {yes} yes of {}",
            data.len()
        )));
    }
    let dim = check_dims(data)?;
    let n = data.len();
    let lambda = 1.0 / (config.c * n as f64);

    // w = scale * v keeps the shrink step O(1).
    let mut v = vec![0.0; dim];
    let mut scale = 1.0;
    let mut bias = 0.0;
    let mut t = 0u64;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::seeded(config.seed);
    let mut model = LinearModel {
        weights: Vec::new(),
        bias: 0.0,
        calibration: Calibration::IDENTITY,
        config: config.clone(),
        objective_log: Vec::with_capacity(config.epochs),
    };

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let (x, label) = &data[i];
            let y = label_sign(*label);
            let eta = 1.0 / (lambda * t as f64);
            let margin = y * (scale * x.dot_dense(&v) + bias);
            scale *= 1.0 - eta * lambda;
            if scale == 0.0 {
                v.iter_mut().for_each(|w| *w = 0.0);
                scale = 1.0;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for (j, xj) in x.iter() {
                    v[j] += step * xj;
                }
                bias += eta * y;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
        model.weights = v.iter().map(|w| w * scale).collect();
        model.bias = bias;
        let obj = model.objective(data);
        model.objective_log.push(obj);
    }
    model.weights = v.iter().map(|w| w * scale).collect();
    model.bias = bias;
    if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
        return Err(Error::Training {
            epoch: config.epochs,
            message: "non-finite weights".into(),
        });
    }
    Ok(model)
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn margin(&self, x: &SparseVector) -> Result<f64> {
        if x.dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.dim,
            });
        }
        Ok(x.dot_dense(&self.weights) + self.bias)
    }

    /// Label and raw margin. A margin of exactly zero predicts yes.
    pub fn predict(&self, x: &SparseVector) -> Result<(bool, f64)> {
        let m = self.margin(x)?;
        Ok((m >= 0.0, m))
    }

    pub fn probability(&self, x: &SparseVector) -> Result<f64> {
        Ok(self.calibration.probability(self.margin(x)?))
    }

    pub fn objective(&self, data: &[(SparseVector, bool)]) -> f64 {
        let reg = 0.5 * self.weights.iter().map(|w| w * w).sum::<f64>();
        let hinge: f64 = data
            .iter()
            .map(|(x, y)| (1.0 - label_sign(*y) * (x.dot_dense(&self.weights) + self.bias)).max(0.0))
            .sum();
        reg + self.config.c * hinge
    }

    /// Fit the sigmoid on held-out margins (see [`fit_sigmoid`]).
    pub fn calibrate(&self, dev: &[(SparseVector, bool)]) -> Result<LinearModel> {
        let margins = dev.iter().map(|(x, _)| self.margin(x)).collect::<Result<Vec<_>>>()?;
        let labels: Vec<bool> = dev.iter().map(|d| d.1).collect();
        let mut out = self.clone();
        out.calibration = fit_sigmoid(&margins, &labels)?;
        Ok(out)
    }
}

/// Platt targets: `(N+ + 1) / (N+ + 2)` for yes and `1 / (N- + 2)` for no.
/// They keep the maximum-likelihood fit finite on separable data.
pub fn platt_targets(labels: &[bool]) -> (f64, f64) {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    ((pos + 1.0) / (pos + 2.0), 1.0 / (neg + 2.0))
}

/// Negative log-likelihood of `calibration` against Platt targets.
pub fn sigmoid_nll(margins: &[f64], labels: &[bool], calibration: Calibration) -> f64 {
    let (hi, lo) = platt_targets(labels);
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &l)| {
            let z = calibration.a * m + calibration.b;
            let t = if l { hi } else { lo };
            softplus(z) - t * z
        })
        .sum()
}

/// Maximum-likelihood sigmoid over margins by damped Newton steps, starting
/// from the identity mapping. Every accepted step lowers the likelihood
/// objective and keeps `a > 0`.
pub fn fit_sigmoid(margins: &[f64], labels: &[bool]) -> Result<Calibration> {
    let yes = labels.iter().filter(|&&l| l).count();
    if margins.is_empty() || yes == 0 || yes == labels.len() {
        return Err(Error::Calibration(format!(
            "dev set needs both classes, got {yes} yes of {}",
            labels.len()
        )));
    }
    if margins.iter().any(|m| !m.is_finite()) {
        return Err(Error::Calibration("non-finite margin".into()));
    }
    let (hi, lo) = platt_targets(labels);
    let mut cal = Calibration::IDENTITY;
    let mut nll = sigmoid_nll(margins, labels, cal);
    for _ in 0..200 {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&m, &l) in margins.iter().zip(labels) {
            let p = cal.probability(m);
            let t = if l { hi } else { lo };
            let d = p - t;
            let w = (p * (1.0 - p)).max(1e-12);
            ga += d * m;
            gb += d;
            haa += w * m * m;
            hab += w * m;
            hbb += w;
        }
        if ga.abs() < 1e-12 && gb.abs() < 1e-12 {
            break;
        }
        haa += 1e-12;
        hbb += 1e-12;
        let det = haa * hbb - hab * hab;
        let (da, db) = if det > 0.0 {
            (-(hbb * ga - hab * gb) / det, -(haa * gb - hab * ga) / det)
        } else {
            (-ga, -gb)
        };
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-10 {
            let cand = Calibration {
                a: cal.a + step * da,
                b: cal.b + step * db,
            };
            if cand.a > 0.0 {
                let cand_nll = sigmoid_nll(margins, labels, cand);
                if cand_nll < nll {
                    accepted = nll - cand_nll > 1e-13 * nll.abs().max(1.0);
                    cal = cand;
                    nll = cand_nll;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(cal)
}
