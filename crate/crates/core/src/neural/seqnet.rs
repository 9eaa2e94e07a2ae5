//! Sequence classifier: token embeddings, bidirectional LSTM, attention
//! pooling, then a three-layer dense stack whose last layer is the 2-unit
//! output. The two hidden dense layers are followed by layer normalization,
//! ReLU and dropout.

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::embeddings::StaticEmbeddings;
use super::layers::{dropout_mask, Attention, AttentionCache, Dense, LayerNorm, LayerNormCache, Lstm, LstmStep};
use super::ops::{cross_entropy, softmax};
use super::params::{Params, TensorId};
use super::Network;
use crate::featurize::tokenize;
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const UNK: u32 = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingProvider {
    /// Learned table over the most frequent training tokens (plus UNK).
    TrainableTable { vocab_size: usize, dim: usize },
    /// Frozen vectors from a static embedding file.
    StaticFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeqNetConfig {
    pub embedding: EmbeddingProvider,
    pub hidden_dim: usize,
    pub attention_dim: usize,
    /// Widths of the three dense layers; the last is the 2-unit output.
    pub dense_dims: Vec<usize>,
    pub dropout_rate: f64,
    pub layer_norm: bool,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for SeqNetConfig {
    fn default() -> Self {
        SeqNetConfig {
            embedding: EmbeddingProvider::TrainableTable {
                vocab_size: 20_000,
                dim: 32,
            },
            hidden_dim: 32,
            attention_dim: 32,
            dense_dims: vec![64, 32, 2],
            dropout_rate: 0.2,
            layer_norm: true,
            max_tokens: 64,
            seed: 0,
        }
    }
}

impl SeqNetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.dense_dims.len() != 3 {
            return bad("dense_dims must have exactly 3 entries");
        }
        if self.dense_dims[2] != 2 {
            return bad("the output dense layer must have 2 units");
        }
        if self.hidden_dim == 0 || self.attention_dim == 0 || self.max_tokens == 0 || self.dense_dims.contains(&0) {
            return bad("seqnet sizes must be positive");
        }
        if let EmbeddingProvider::TrainableTable { vocab_size, dim } = self.embedding {
            if vocab_size == 0 || dim == 0 {
                return bad("embedding table sizes must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate outside [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeqNet {
    pub config: SeqNetConfig,
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    params: Params,
    pub embed: TensorId,
    pub embed_dim: usize,
    pub forward_lstm: Lstm,
    pub backward_lstm: Lstm,
    pub attention: Attention,
    pub dense: [Dense; 3],
    pub norms: [LayerNorm; 2],
}

struct Trace {
    embs: Vec<Vec<f64>>,
    fwd: Vec<LstmStep>,
    bwd: Vec<LstmStep>,
    hs: Vec<Vec<f64>>,
    attn: AttentionCache,
    /// Inputs to each dense layer.
    xs: [Vec<f64>; 3],
    norm: [Option<LayerNormCache>; 2],
    /// Post-norm, pre-ReLU activations of the hidden layers.
    pre_relu: [Vec<f64>; 2],
    masks: [Option<Vec<f64>>; 2],
    logits: Vec<f64>,
}

impl SeqNet {
    /// Builds the model; a trainable table takes its vocabulary from `texts`.
    pub fn new(config: SeqNetConfig, texts: &[&str]) -> Result<Self> {
        config.validate()?;
        match &config.embedding {
            EmbeddingProvider::TrainableTable { vocab_size, dim } => {
                let mut freq: HashMap<String, usize> = HashMap::new();
                for t in texts {
                    for tok in tokenize(t) {
                        *freq.entry(tok).or_default() += 1;
                    }
                }
                let mut toks: Vec<(String, usize)> = freq.into_iter().collect();
                toks.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                let vocab = toks.into_iter().take(vocab_size - 1).map(|(t, _)| t).collect();
                let dim = *dim;
                Self::build(config, vocab, dim, None)
            }
            EmbeddingProvider::StaticFile { path } => {
                let table = StaticEmbeddings::load(path)?;
                Self::with_static(config, &table)
            }
        }
    }

    /// Builds the model over a frozen static table.
    pub fn with_static(config: SeqNetConfig, table: &StaticEmbeddings) -> Result<Self> {
        config.validate()?;
        let mut rows = table.mean().to_vec();
        rows.extend_from_slice(table.rows());
        Self::build(config, table.tokens().to_vec(), table.dim(), Some(rows))
    }

    /// Rebuilds the layer layout for a stored vocabulary.
    pub fn with_vocab(config: SeqNetConfig, vocab: Vec<String>, embed_dim: usize) -> Result<Self> {
        config.validate()?;
        let frozen = matches!(config.embedding, EmbeddingProvider::StaticFile { .. });
        let rows = frozen.then(|| vec![0.0; (vocab.len() + 1) * embed_dim]);
        Self::build(config, vocab, embed_dim, rows)
    }

    fn build(config: SeqNetConfig, vocab: Vec<String>, embed_dim: usize, frozen_rows: Option<Vec<f64>>) -> Result<Self> {
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, t) in vocab.iter().enumerate() {
            if index.insert(t.clone(), i as u32 + 1).is_some() {
                return Err(Error::Conflict(format!("duplicate token {t:?} in vocabulary")));
            }
        }
        let mut rng = rng::derived(config.seed, "seqnet-init");
        let mut p = Params::default();
        let rows = vocab.len() + 1;
        let embed = match frozen_rows {
            Some(data) => p.add("embed", &[rows, embed_dim], data, false),
            None => p.add_uniform("embed", &[rows, embed_dim], 1, &mut rng),
        };
        let h = config.hidden_dim;
        let forward_lstm = Lstm::new(&mut p, "lstm_fwd", embed_dim, h, &mut rng);
        let backward_lstm = Lstm::new(&mut p, "lstm_bwd", embed_dim, h, &mut rng);
        let attention = Attention::new(&mut p, "attention", 2 * h, config.attention_dim, &mut rng);
        let d = &config.dense_dims;
        let dense = [
            Dense::new(&mut p, "dense1", 2 * h, d[0], &mut rng),
            Dense::new(&mut p, "dense2", d[0], d[1], &mut rng),
            Dense::new(&mut p, "dense3", d[1], d[2], &mut rng),
        ];
        let norms = [LayerNorm::new(&mut p, "norm1", d[0]), LayerNorm::new(&mut p, "norm2", d[1])];
        Ok(SeqNet {
            config,
            vocab,
            index,
            params: p,
            embed,
            embed_dim,
            forward_lstm,
            backward_lstm,
            attention,
            dense,
            norms,
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn set_params(&mut self, params: Params) -> Result<()> {
        super::load_params(&mut self.params, params)
    }

    /// Attention weights over the tokens of `text`.
    pub fn attention_weights(&self, text: &str) -> Result<Vec<f64>> {
        let ids = self.encode(text)?;
        Ok(self.trace(&ids, None).attn.alpha)
    }

    fn trace(&self, ids: &[u32], mut dropout: Option<&mut Rng>) -> Trace {
        let p = &self.params;
        let e = self.embed_dim;
        let table = p.get(self.embed);
        let embs: Vec<Vec<f64>> = ids.iter().map(|&i| table[i as usize * e..(i as usize + 1) * e].to_vec()).collect();
        let (hf, fwd) = self.forward_lstm.forward(p, &embs);
        let rev: Vec<Vec<f64>> = embs.iter().rev().cloned().collect();
        let (hb, bwd) = self.backward_lstm.forward(p, &rev);
        let n = ids.len();
        let hs: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                let mut h = hf[t].clone();
                h.extend_from_slice(&hb[n - 1 - t]);
                h
            })
            .collect();
        let (pooled, attn) = self.attention.forward(p, &hs);
        let mut xs: [Vec<f64>; 3] = [pooled, Vec::new(), Vec::new()];
        let mut norm = [None, None];
        let mut pre_relu = [Vec::new(), Vec::new()];
        let mut masks = [None, None];
        for l in 0..2 {
            let a = self.dense[l].forward(p, &xs[l]);
            let a = if self.config.layer_norm {
                let (y, cache) = self.norms[l].forward(p, &a);
                norm[l] = Some(cache);
                y
            } else {
                a
            };
            let mut out: Vec<f64> = a.iter().map(|v| v.max(0.0)).collect();
            if let Some(rng) = dropout.as_deref_mut() {
                if self.config.dropout_rate > 0.0 {
                    let m = dropout_mask(out.len(), self.config.dropout_rate, rng);
                    out.iter_mut().zip(&m).for_each(|(o, k)| *o *= k);
                    masks[l] = Some(m);
                }
            }
            pre_relu[l] = a;
            xs[l + 1] = out;
        }
        let logits = self.dense[2].forward(p, &xs[2]);
        Trace {
            embs,
            fwd,
            bwd,
            hs,
            attn,
            xs,
            norm,
            pre_relu,
            masks,
            logits,
        }
    }

    fn backward(&self, g: &mut Params, ids: &[u32], tr: &Trace, dlogits: &[f64]) {
        let p = &self.params;
        let mut dx = self.dense[2].backward(p, g, &tr.xs[2], dlogits);
        for l in (0..2).rev() {
            if let Some(m) = &tr.masks[l] {
                dx.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
            }
            dx.iter_mut().zip(&tr.pre_relu[l]).for_each(|(d, a)| {
                if *a <= 0.0 {
                    *d = 0.0
                }
            });
            if let Some(cache) = &tr.norm[l] {
                dx = self.norms[l].backward(p, g, cache, &dx);
            }
            dx = self.dense[l].backward(p, g, &tr.xs[l], &dx);
        }
        let dhs = self.attention.backward(p, g, &tr.hs, &tr.attn, &dx);
        let h = self.config.hidden_dim;
        let n = ids.len();
        let dhf: Vec<Vec<f64>> = dhs.iter().map(|d| d[..h].to_vec()).collect();
        let dhb: Vec<Vec<f64>> = (0..n).map(|t| dhs[n - 1 - t][h..].to_vec()).collect();
        let dx_f = self.forward_lstm.backward(p, g, &tr.fwd, &dhf);
        let dx_b = self.backward_lstm.backward(p, g, &tr.bwd, &dhb);
        if !p.tensors[self.embed].trainable {
            return;
        }
        let e = self.embed_dim;
        let ge = g.get_mut(self.embed);
        for t in 0..n {
            let row = ids[t] as usize * e;
            for k in 0..e {
                ge[row + k] += dx_f[t][k] + dx_b[n - 1 - t][k];
            }
        }
        debug_assert_eq!(tr.embs.len(), n);
    }
}

impl Network for SeqNet {
    type Input = Vec<u32>;

    /// Token ids truncated to `max_tokens`; an empty token list is an error.
    fn encode(&self, text: &str) -> Result<Vec<u32>> {
        let ids: Vec<u32> = tokenize(text)
            .into_iter()
            .take(self.config.max_tokens)
            .map(|t| self.index.get(&t).copied().unwrap_or(UNK))
            .collect();
        if ids.is_empty() {
            return Err(Error::EmptyInput("no tokens to attend over".into()));
        }
        Ok(ids)
    }

    fn params(&self) -> &Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn probs(&self, input: &Vec<u32>) -> [f64; 2] {
        let p = softmax(&self.trace(input, None).logits);
        [p[0], p[1]]
    }

    fn kink_margin(&self, input: &Vec<u32>) -> f64 {
        let tr = self.trace(input, None);
        tr.pre_relu.iter().flatten().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    fn batch_loss(&self, batch: &[(&Vec<u32>, usize)], mut dropout: Option<&mut Rng>, mut grads: Option<&mut Params>) -> f64 {
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &(ids, label) in batch {
            let tr = self.trace(ids, dropout.as_deref_mut());
            loss += cross_entropy(&tr.logits, label);
            if let Some(g) = grads.as_deref_mut() {
                let mut d = softmax(&tr.logits);
                d[label] -= 1.0;
                d.iter_mut().for_each(|v| *v *= scale);
                self.backward(g, ids, &tr, &d);
            }
        }
        loss * scale
    }
}
