//! Character CNN: embedded characters, one convolution branch per kernel
//! size with ReLU and global max-pooling, concatenation, dropout and a dense
//! softmax head.
//!
//! Inputs are padded to `max_len` with a PAD id whose embedding is the zero
//! vector, so a window lying entirely in the padding evaluates to the
//! branch bias. Convolutions are computed through per-character tables
//! `T[c][j][f] = sum_d W[f][j][d] E[c][d]`, which is cheap because short
//! texts use few distinct characters.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::layers::{dropout_mask, Dense};
use super::ops::{cross_entropy, softmax};
use super::params::{Params, TensorId};
use super::Network;
use crate::rng::{self, Rng};
use crate::{Error, Result};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharCnnConfig {
    pub embed_dim: usize,
    pub charset_size: usize,
    pub max_len: usize,
    pub filters_per_kernel: usize,
    pub kernel_sizes: Vec<usize>,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for CharCnnConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        CharCnnConfig {
            embed_dim: 16,
            charset_size: 20_000,
            max_len: 400,
            filters_per_kernel: 64,
            kernel_sizes: vec![3, 5, 7],
            dropout_rate: 0.3,
            seed: 0,
        }
    }
}

impl CharCnnConfig {
    /// Full-size configuration (128-dim embeddings, 1,024 filters).
    pub fn full_size() -> Self {
        CharCnnConfig {
            embed_dim: 128,
            filters_per_kernel: 1024,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.embed_dim == 0 || self.charset_size == 0 || self.filters_per_kernel == 0 {
            return bad("c-CNN sizes must be positive".into());
        }
        if self.kernel_sizes.is_empty() || self.kernel_sizes.contains(&0) {
            return bad("kernel sizes must be non-empty and positive".into());
        }
        let max_k = *self.kernel_sizes.iter().max().unwrap();
        if self.max_len < max_k {
            return bad(format!("max_len {} is below kernel size {max_k}", self.max_len));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBranch {
    /// Shape `[filters, k, embed_dim]`.
    pub w: TensorId,
    pub b: TensorId,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharCnn {
    pub config: CharCnnConfig,
    charset: Vec<char>,
    index: HashMap<char, u32>,
    params: Params,
    pub embed: TensorId,
    pub branches: Vec<ConvBranch>,
    pub head: Dense,
}

/// Per-batch convolution tables, one per branch, laid out `[local][j][f]`.
struct Tables {
    local: HashMap<u32, usize>,
    ids: Vec<u32>,
    t: Vec<Vec<f64>>,
}

struct Trace {
    /// Pre-activation max per pooled feature.
    pooled: Vec<f64>,
    /// Window start of the max, `None` when the max is an all-padding window.
    argmax: Vec<Option<usize>>,
    /// Distance from the max to the runner-up window value.
    gaps: Vec<f64>,
    hidden: Vec<f64>,
    mask: Option<Vec<f64>>,
    logits: Vec<f64>,
}

impl CharCnn {
    /// Builds the charset from the most frequent characters of `texts`.
    pub fn new(config: CharCnnConfig, texts: &[&str]) -> Result<Self> {
        config.validate()?;
        let mut freq: HashMap<char, usize> = HashMap::new();
        for t in texts {
            for c in t.chars() {
                *freq.entry(c).or_default() += 1;
            }
        }
        let mut chars: Vec<(char, usize)> = freq.into_iter().collect();
        chars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let charset = chars.into_iter().take(config.charset_size).map(|(c, _)| c).collect();
        Self::with_charset(config, charset)
    }

    pub fn with_charset(config: CharCnnConfig, charset: Vec<char>) -> Result<Self> {
        config.validate()?;
        let mut index = HashMap::with_capacity(charset.len());
        for (i, &c) in charset.iter().enumerate() {
            if index.insert(c, i as u32 + 2).is_some() {
                return Err(Error::Conflict(format!("duplicate character {c:?} in charset")));
            }
        }
        let mut rng = rng::derived(config.seed, "ccnn-init");
        let mut params = Params::default();
        let rows = charset.len() + 2;
        let e = config.embed_dim;
        let embed = params.add_uniform("embed", &[rows, e], 1, &mut rng);
        params.get_mut(embed)[..e].iter_mut().for_each(|v| *v = 0.0);
        let f = config.filters_per_kernel;
        let branches = config
            .kernel_sizes
            .iter()
            .map(|&k| ConvBranch {
                w: params.add_uniform(format!("conv{k}.w"), &[f, k, e], k * e, &mut rng),
                b: params.add_uniform(format!("conv{k}.b"), &[f], k * e, &mut rng),
                k,
            })
            .collect::<Vec<_>>();
        let head = Dense::new(&mut params, "head", f * branches.len(), 2, &mut rng);
        Ok(CharCnn {
            config,
            charset,
            index,
            params,
            embed,
            branches,
            head,
        })
    }

    pub fn charset(&self) -> &[char] {
        &self.charset
    }

    pub fn set_params(&mut self, params: Params) -> Result<()> {
        super::load_params(&mut self.params, params)
    }

    /// Zeroes the output layer, making every prediction (0.5, 0.5).
    pub fn zero_head(&mut self) {
        self.params.get_mut(self.head.w).iter_mut().for_each(|v| *v = 0.0);
        self.params.get_mut(self.head.b).iter_mut().for_each(|v| *v = 0.0);
    }

    fn n_features(&self) -> usize {
        self.config.filters_per_kernel * self.branches.len()
    }

    fn tables<'a>(&self, inputs: impl Iterator<Item = &'a Vec<u32>>) -> Tables {
        let set: std::collections::BTreeSet<u32> = inputs.flat_map(|x| x.iter().copied()).collect();
        let ids: Vec<u32> = set.into_iter().collect();
        let local = ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let e = self.config.embed_dim;
        let f_n = self.config.filters_per_kernel;
        let emb = self.params.get(self.embed);
        let t = self
            .branches
            .iter()
            .map(|br| {
                let w = self.params.get(br.w);
                let mut t = vec![0.0; ids.len() * br.k * f_n];
                for (li, &c) in ids.iter().enumerate() {
                    let ec = &emb[c as usize * e..(c as usize + 1) * e];
                    for j in 0..br.k {
                        for f in 0..f_n {
                            let wrow = &w[(f * br.k + j) * e..(f * br.k + j + 1) * e];
                            t[(li * br.k + j) * f_n + f] = wrow.iter().zip(ec).map(|(a, b)| a * b).sum();
                        }
                    }
                }
                t
            })
            .collect();
        Tables { local, ids, t }
    }

    fn trace(&self, tables: &Tables, input: &[u32], dropout: Option<&mut Rng>) -> Trace {
        let f_n = self.config.filters_per_kernel;
        let len = input.len();
        let locs: Vec<usize> = input.iter().map(|c| tables.local[c]).collect();
        let mut pooled = Vec::with_capacity(self.n_features());
        let mut argmax = Vec::with_capacity(self.n_features());
        let mut gaps = Vec::with_capacity(self.n_features());
        for (bi, br) in self.branches.iter().enumerate() {
            let bias = self.params.get(br.b);
            let t = &tables.t[bi];
            let n_pos = len.min(self.config.max_len + 1 - br.k);
            let has_pad_window = len + br.k <= self.config.max_len;
            let mut best: Vec<Option<(usize, f64)>> = vec![None; f_n];
            let mut second = vec![f64::NEG_INFINITY; f_n];
            let mut z = vec![0.0; f_n];
            for p in 0..n_pos {
                z.copy_from_slice(bias);
                for j in 0..br.k.min(len - p) {
                    let row = &t[(locs[p + j] * br.k + j) * f_n..][..f_n];
                    for (zv, r) in z.iter_mut().zip(row) {
                        *zv += r;
                    }
                }
                for (f, &zv) in z.iter().enumerate() {
                    match best[f] {
                        Some((_, m)) if zv <= m => second[f] = second[f].max(zv),
                        Some((_, m)) => {
                            second[f] = m;
                            best[f] = Some((p, zv));
                        }
                        None => best[f] = Some((p, zv)),
                    }
                }
            }
            for f in 0..f_n {
                if has_pad_window {
                    second[f] = second[f].max(match best[f] {
                        Some((_, m)) => m.min(bias[f]),
                        None => f64::NEG_INFINITY,
                    });
                }
                match best[f] {
                    Some((_, m)) if !has_pad_window || m >= bias[f] => {
                        pooled.push(m);
                        argmax.push(best[f].map(|(p, _)| p));
                    }
                    _ => {
                        pooled.push(bias[f]);
                        argmax.push(None);
                    }
                }
                gaps.push(pooled.last().unwrap() - second[f]);
            }
        }
        let mut hidden: Vec<f64> = pooled.iter().map(|v| v.max(0.0)).collect();
        let mask = match dropout {
            Some(rng) if self.config.dropout_rate > 0.0 => {
                let m = dropout_mask(hidden.len(), self.config.dropout_rate, rng);
                hidden.iter_mut().zip(&m).for_each(|(h, k)| *h *= k);
                Some(m)
            }
            _ => None,
        };
        let logits = self.head.forward(&self.params, &hidden);
        Trace {
            pooled,
            argmax,
            gaps,
            hidden,
            mask,
            logits,
        }
    }
}

impl Network for CharCnn {
    type Input = Vec<u32>;

    /// Character ids truncated to `max_len`; unknown characters map to UNK.
    fn encode(&self, text: &str) -> Result<Vec<u32>> {
        Ok(text
            .chars()
            .take(self.config.max_len)
            .map(|c| self.index.get(&c).copied().unwrap_or(UNK))
            .collect())
    }

    fn params(&self) -> &Params {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Params {
        &mut self.params
    }

    fn probs(&self, input: &Vec<u32>) -> [f64; 2] {
        let tables = self.tables(std::iter::once(input));
        let p = softmax(&self.trace(&tables, input, None).logits);
        [p[0], p[1]]
    }

    fn kink_margin(&self, input: &Vec<u32>) -> f64 {
        let tables = self.tables(std::iter::once(input));
        let tr = self.trace(&tables, input, None);
        tr.pooled.iter().chain(&tr.gaps).fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }

    fn batch_loss(&self, batch: &[(&Vec<u32>, usize)], mut dropout: Option<&mut Rng>, mut grads: Option<&mut Params>) -> f64 {
        let tables = self.tables(batch.iter().map(|(x, _)| *x));
        let f_n = self.config.filters_per_kernel;
        let scale = 1.0 / batch.len() as f64;
        let mut dt: Vec<Vec<f64>> = tables.t.iter().map(|t| vec![0.0; t.len()]).collect();
        let mut loss = 0.0;
        for &(input, label) in batch {
            let tr = self.trace(&tables, input, dropout.as_deref_mut());
            loss += cross_entropy(&tr.logits, label);
            let Some(g) = grads.as_deref_mut() else { continue };
            let mut dlogits = softmax(&tr.logits);
            dlogits[label] -= 1.0;
            dlogits.iter_mut().for_each(|d| *d *= scale);
            let mut dh = self.head.backward(&self.params, g, &tr.hidden, &dlogits);
            if let Some(m) = &tr.mask {
                dh.iter_mut().zip(m).for_each(|(d, k)| *d *= k);
            }
            for (bi, br) in self.branches.iter().enumerate() {
                for f in 0..f_n {
                    let idx = bi * f_n + f;
                    if tr.pooled[idx] <= 0.0 || dh[idx] == 0.0 {
                        continue;
                    }
                    let dz = dh[idx];
                    g.get_mut(br.b)[f] += dz;
                    if let Some(p) = tr.argmax[idx] {
                        for j in 0..br.k.min(input.len() - p) {
                            let li = tables.local[&input[p + j]];
                            dt[bi][(li * br.k + j) * f_n + f] += dz;
                        }
                    }
                }
            }
        }
        if let Some(g) = grads {
            let e = self.config.embed_dim;
            let emb = self.params.get(self.embed).to_vec();
            let mut demb: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for (bi, br) in self.branches.iter().enumerate() {
                let w = self.params.get(br.w);
                let dw = g.get_mut(br.w);
                for (li, &c) in tables.ids.iter().enumerate() {
                    let ec = &emb[c as usize * e..(c as usize + 1) * e];
                    let de = demb.entry(c as usize).or_insert_with(|| vec![0.0; e]);
                    for j in 0..br.k {
                        for f in 0..f_n {
                            let d = dt[bi][(li * br.k + j) * f_n + f];
                            if d == 0.0 {
                                continue;
                            }
                            let off = (f * br.k + j) * e;
                            for k in 0..e {
                                dw[off + k] += d * ec[k];
                                de[k] += d * w[off + k];
                            }
                        }
                    }
                }
            }
            let ge = g.get_mut(self.embed);
            for (c, de) in demb {
                for k in 0..e {
                    ge[c * e + k] += de[k];
                }
            }
        }
        loss * scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> CharCnn {
        let cfg = CharCnnConfig {
            embed_dim: 4,
            charset_size: 100,
            max_len: 6,
            filters_per_kernel: 2,
            kernel_sizes: vec![2],
            dropout_rate: 0.0,
            seed: 5,
        };
        CharCnn::new(cfg, &["abcab", "xyz"]).unwrap()
    }

    /// Direct convolution over the explicitly padded embedding matrix.
    fn unrolled(m: &CharCnn, text: &str) -> [f64; 2] {
        let p = m.params();
        let (e, f_n, max_len) = (4, 2, 6);
        let ids = m.encode(text).unwrap();
        let emb = p.get(m.embed);
        let mut x = vec![vec![0.0; e]; max_len];
        for (pos, &c) in ids.iter().enumerate() {
            x[pos] = emb[c as usize * e..(c as usize + 1) * e].to_vec();
        }
        let br = &m.branches[0];
        let (w, b) = (p.get(br.w), p.get(br.b));
        let mut h = vec![0.0; f_n];
        for f in 0..f_n {
            let mut best = f64::NEG_INFINITY;
            for pos in 0..=max_len - 2 {
                let mut z = b[f];
                for j in 0..2 {
                    for d in 0..e {
                        z += w[(f * 2 + j) * e + d] * x[pos + j][d];
                    }
                }
                best = best.max(z);
            }
            h[f] = best.max(0.0);
        }
        let hw = p.get(m.head.w);
        let hb = p.get(m.head.b);
        let l0 = hb[0] + hw[0] * h[0] + hw[1] * h[1];
        let l1 = hb[1] + hw[2] * h[0] + hw[3] * h[1];
        let z = (l0.exp() + l1.exp()).ln();
        [(l0 - z).exp(), (l1 - z).exp()]
    }

    #[test]
    fn matches_hand_unrolled_convolution() {
        let m = tiny();
        for text in ["ab", "abcabcabc", "", "q", "zzzzzz"] {
            let got = m.probs(&m.encode(text).unwrap());
            let want = unrolled(&m, text);
            for k in 0..2 {
                assert!((got[k] - want[k]).abs() < 1e-12, "{text}: {got:?} vs {want:?}");
            }
        }
    }

    #[test]
    fn zero_head_gives_half() {
        let mut m = tiny();
        m.zero_head();
        assert_eq!(m.probs(&m.encode("abc").unwrap()), [0.5, 0.5]);
    }

    #[test]
    fn truncation_matches_prefix() {
        let m = tiny();
        let long = "abcabxyzab";
        let prefix: String = long.chars().take(6).collect();
        assert_eq!(m.prob_yes(long).unwrap(), m.prob_yes(&prefix).unwrap());
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = tiny();
        for t in ["", "a", "hello world", "ÿ€"] {
            let p = m.probs(&m.encode(t).unwrap());
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pad_row_stays_zero_and_unknown_uses_unk() {
        let m = tiny();
        assert!(m.params().get(m.embed)[..4].iter().all(|v| *v == 0.0));
        assert_eq!(m.encode("a?").unwrap()[1], UNK);
    }

    #[test]
    fn rejects_short_max_len() {
        let cfg = CharCnnConfig {
            max_len: 4,
            ..CharCnnConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
    }
}
