//! Mini-batch training with Adam, global-norm gradient clipping, a
//! stratified dev split and early stopping on dev macro-F1.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::params::Params;
use super::Network;
use crate::corpus::{stratified_split, LabeledText};
use crate::evaluate::macro_f1;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dev_fraction: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dev_fraction: 0.05,
            batch_size: 32,
            max_epochs: 50,
            patience: 5,
            learning_rate: 2e-3,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "dev_fraction {} must be in (0, 0.5)",
                self.dev_fraction
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::InvalidConfig("batch_size, max_epochs and patience must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.clip_norm > 0.0) {
            return Err(Error::InvalidConfig("learning_rate and clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch (1-based) of the returned checkpoint.
    pub best_epoch: usize,
    pub train_size: usize,
    pub dev_size: usize,
}

/// Tracks the best dev score; stops after `patience` epochs without a
/// strict improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
        }
    }

    /// Records `metric` for `epoch`; returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> (bool, bool) {
        let improved = metric > self.best;
        if improved {
            self.best = metric;
            self.best_epoch = epoch;
        }
        (improved, epoch - self.best_epoch >= self.patience)
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

struct Adam {
    m: Params,
    v: Params,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(p: &Params, lr: f64) -> Self {
        Adam {
            m: p.zeros_like(),
            v: p.zeros_like(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, p: &mut Params, g: &Params) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (i, t) in p.tensors.iter_mut().enumerate() {
            if !t.trainable {
                continue;
            }
            let (m, v, gr) = (&mut self.m.tensors[i].data, &mut self.v.tensors[i].data, &g.tensors[i].data);
            for k in 0..t.data.len() {
                m[k] = Self::B1 * m[k] + (1.0 - Self::B1) * gr[k];
                v[k] = Self::B2 * v[k] + (1.0 - Self::B2) * gr[k] * gr[k];
                t.data[k] -= self.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + Self::EPS);
            }
        }
    }
}

fn predict<N: Network>(net: &N, inputs: &[N::Input]) -> Vec<bool> {
    inputs.iter().map(|x| net.probs(x)[1] >= 0.5).collect()
}

/// Trains `net` on `data` and returns the best-dev checkpoint.
pub fn train_network<N: Network>(mut net: N, data: &[LabeledText], config: &TrainConfig) -> Result<(N, TrainLog)> {
    config.validate()?;
    if data.len() < 20 {
        return Err(Error::DegenerateTraining(format!(
            "need at least 20 labelled texts, got {}",
            data.len()
        )));
    }
    let dev_size = ((data.len() as f64 * config.dev_fraction).round() as usize).max(2);
    let split = stratified_split(data, |t| t.label, dev_size, config.seed).map_err(|e| Error::DegenerateTraining(e.to_string()))?;
    let encode = |ix: &[usize]| -> Result<(Vec<N::Input>, Vec<usize>)> {
        let mut xs = Vec::with_capacity(ix.len());
        let mut ys = Vec::with_capacity(ix.len());
        for &i in ix {
            xs.push(net.encode(&data[i].text)?);
            ys.push(data[i].label as usize);
        }
        Ok((xs, ys))
    };
    let (train_x, train_y) = encode(&split.train)?;
    let (dev_x, dev_y) = encode(&split.test)?;
    let dev_gold: Vec<bool> = dev_y.iter().map(|&y| y == 1).collect();

    let mut shuffle_rng = rng::derived(config.seed, "train-shuffle");
    let mut dropout_rng = rng::derived(config.seed, "train-dropout");
    let mut adam = Adam::new(net.params(), config.learning_rate);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = net.params().clone();
    let mut log = TrainLog {
        train_size: train_x.len(),
        dev_size: dev_x.len(),
        ..TrainLog::default()
    };
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&N::Input, usize)> = chunk.iter().map(|&i| (&train_x[i], train_y[i])).collect();
            let mut grads = net.params().zeros_like();
            let loss = net.batch_loss(&batch, Some(&mut dropout_rng), Some(&mut grads));
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("non-finite loss {loss}"),
                });
            }
            total += loss * chunk.len() as f64;
            let norm = grads.global_norm();
            if norm > config.clip_norm {
                grads.scale(config.clip_norm / norm);
            }
            adam.step(net.params_mut(), &grads);
        }
        let train_loss = total / train_x.len() as f64;
        let dev_f1 = macro_f1(&predict(&net, &dev_x), &dev_gold)?;
        log::debug!("epoch {epoch}: loss {train_loss:.5} dev macro-F1 {dev_f1:.4}");
        log.epochs.push(EpochLog {
            epoch,
            train_loss,
            dev_macro_f1: dev_f1,
        });
        let (improved, stop) = stopper.observe(epoch, dev_f1);
        if improved {
            best = net.params().clone();
        }
        if stop {
            break;
        }
    }
    log.best_epoch = stopper.best_epoch();
    *net.params_mut() = best;
    Ok((net, log))
}
