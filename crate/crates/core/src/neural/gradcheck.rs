//! Central finite-difference checks of the hand-written gradients.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ccnn::{CharCnn, CharCnnConfig};
use super::params::Params;
use super::seqnet::{EmbeddingProvider, SeqNet, SeqNetConfig};
use super::Network;
use crate::{Error, Result};

pub const STEP: f64 = 1e-4;

/// Relative error `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuralKind {
    CharCnn,
    SeqNet,
}

impl FromStr for NeuralKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ccnn" | "char_cnn" => Ok(NeuralKind::CharCnn),
            "seqnet" => Ok(NeuralKind::SeqNet),
            other => Err(format!("unknown neural model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Worst relative error per trainable tensor.
    pub per_tensor: Vec<(String, f64)>,
    pub checked: usize,
}

/// Compares `analytic` against central differences of `loss` for every
/// trainable parameter of `params`.
pub fn check_params(params: &mut Params, analytic: &Params, mut loss: impl FnMut(&Params) -> f64) -> Result<GradCheckReport> {
    let base = loss(params);
    if !base.is_finite() {
        return Err(Error::Training {
            epoch: 0,
            message: format!("non-finite loss {base}"),
        });
    }
    let mut per_tensor = Vec::new();
    let mut checked = 0;
    let mut max_err: f64 = 0.0;
    for ti in 0..params.tensors.len() {
        if !params.tensors[ti].trainable {
            continue;
        }
        let mut worst: f64 = 0.0;
        for k in 0..params.tensors[ti].data.len() {
            let orig = params.tensors[ti].data[k];
            params.tensors[ti].data[k] = orig + STEP;
            let plus = loss(params);
            params.tensors[ti].data[k] = orig - STEP;
            let minus = loss(params);
            params.tensors[ti].data[k] = orig;
            if !(plus.is_finite() && minus.is_finite()) {
                return Err(Error::Training {
                    epoch: 0,
                    message: "non-finite loss during finite differences".into(),
                });
            }
            let numeric = (plus - minus) / (2.0 * STEP);
            let re = relative_error(analytic.tensors[ti].data[k], numeric);
            worst = worst.max(re);
            checked += 1;
        }
        max_err = max_err.max(worst);
        per_tensor.push((params.tensors[ti].name.clone(), worst));
    }
    Ok(GradCheckReport {
        max_relative_error: max_err,
        per_tensor,
        checked,
    })
}

/// Checks a whole network on the mean cross-entropy of `batch`.
pub fn check_network<N: Network>(net: &mut N, batch: &[(N::Input, usize)]) -> Result<GradCheckReport> {
    let refs: Vec<(&N::Input, usize)> = batch.iter().map(|(x, y)| (x, *y)).collect();
    let mut grads = net.params().zeros_like();
    net.batch_loss(&refs, None, Some(&mut grads));
    let probe = net.clone();
    let mut params = net.params().clone();
    let report = check_params(&mut params, &grads, |p| {
        let mut m = probe.clone();
        *m.params_mut() = p.clone();
        m.batch_loss(&refs, None, None)
    })?;
    Ok(report)
}

const TEXTS: [(&str, usize); 4] = [
    ("I loved it so much!", 1),
    ("The box weighs 3 kg.", 0),
    ("Why does it fail?", 1),
    ("ok", 0),
];

pub fn tiny_char_cnn(seed: u64) -> Result<CharCnn> {
    let cfg = CharCnnConfig {
        embed_dim: 4,
        charset_size: 8,
        max_len: 8,
        filters_per_kernel: 3,
        kernel_sizes: vec![2, 3],
        dropout_rate: 0.0,
        seed,
    };
    let texts: Vec<&str> = TEXTS.iter().map(|t| t.0).collect();
    CharCnn::new(cfg, &texts)
}

pub fn tiny_seqnet(seed: u64) -> Result<SeqNet> {
    let cfg = SeqNetConfig {
        embedding: EmbeddingProvider::TrainableTable { vocab_size: 8, dim: 4 },
        hidden_dim: 3,
        attention_dim: 4,
        dense_dims: vec![5, 4, 2],
        dropout_rate: 0.0,
        layer_norm: true,
        max_tokens: 8,
        seed,
    };
    let texts: Vec<&str> = TEXTS.iter().map(|t| t.0).collect();
    SeqNet::new(cfg, &texts)
}

/// Minimum distance from a ReLU or max-pool switch point that the
/// evaluation point must keep, so that no finite-difference probe crosses one.
pub const KINK_MARGIN: f64 = 1e-2;

const MAX_DRAWS: u64 = 1000;

fn run<N: Network>(build: impl Fn(u64) -> Result<N>, seed: u64) -> Result<GradCheckReport> {
    for draw in 0..MAX_DRAWS {
        let mut net = build(seed.wrapping_mul(MAX_DRAWS).wrapping_add(draw))?;
        let batch = TEXTS.iter().map(|(t, y)| Ok((net.encode(t)?, *y))).collect::<Result<Vec<_>>>()?;
        if batch.iter().any(|(x, _)| net.kink_margin(x) < KINK_MARGIN) {
            continue;
        }
        return check_network(&mut net, &batch);
    }
    Err(Error::InvalidConfig(format!(
        "no initialization within {MAX_DRAWS} draws clears the kink margin"
    )))
}

/// Gradient check of a tiny model (all sizes at most 8, no dropout) at the
/// first initialization drawn from `seed` whose activations on the probe
/// batch keep [`KINK_MARGIN`] from every non-differentiable point.
pub fn grad_check_report(kind: NeuralKind, seed: u64) -> Result<GradCheckReport> {
    match kind {
        NeuralKind::CharCnn => run(tiny_char_cnn, seed),
        NeuralKind::SeqNet => run(tiny_seqnet, seed),
    }
}

/// Maximum relative error of a tiny-model gradient check.
pub fn grad_check(kind: NeuralKind, seed: u64) -> Result<f64> {
    Ok(grad_check_report(kind, seed)?.max_relative_error)
}
