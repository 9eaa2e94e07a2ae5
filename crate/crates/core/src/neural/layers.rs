//! Differentiable building blocks. Each `backward` accumulates parameter
//! gradients into a [`Params`] with the same layout and returns the input
//! gradient.

use super::ops::{add_assign, matvec, matvec_t_acc, outer_acc, sigmoid};
use super::params::{Params, TensorId};
use crate::rng::Rng;

/// Fully connected layer `y = W x + b`, `W` of shape `[n_out, n_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: TensorId,
    pub b: TensorId,
    pub n_in: usize,
    pub n_out: usize,
}

impl Dense {
    pub fn new(p: &mut Params, name: &str, n_in: usize, n_out: usize, rng: &mut Rng) -> Self {
        let w = p.add_uniform(format!("{name}.w"), &[n_out, n_in], n_in, rng);
        let b = p.add_uniform(format!("{name}.b"), &[n_out], n_in, rng);
        Dense { w, b, n_in, n_out }
    }

    pub fn forward(&self, p: &Params, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_out];
        matvec(p.get(self.w), self.n_out, self.n_in, x, &mut y);
        add_assign(&mut y, p.get(self.b));
        y
    }

    pub fn backward(&self, p: &Params, g: &mut Params, x: &[f64], dy: &[f64]) -> Vec<f64> {
        outer_acc(g.get_mut(self.w), dy, x);
        add_assign(g.get_mut(self.b), dy);
        let mut dx = vec![0.0; self.n_in];
        matvec_t_acc(p.get(self.w), self.n_out, self.n_in, dy, &mut dx);
        dx
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: TensorId,
    pub bias: TensorId,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub xhat: Vec<f64>,
    pub inv_std: f64,
}

impl LayerNorm {
    pub fn new(p: &mut Params, name: &str, dim: usize) -> Self {
        let gain = p.add_const(format!("{name}.gain"), &[dim], 1.0);
        let bias = p.add_const(format!("{name}.bias"), &[dim], 0.0);
        LayerNorm { gain, bias, dim }
    }

    /// Normalized input before the affine step.
    pub fn normalize(x: &[f64]) -> (Vec<f64>, f64) {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        (x.iter().map(|v| (v - mean) * inv_std).collect(), inv_std)
    }

    pub fn forward(&self, p: &Params, x: &[f64]) -> (Vec<f64>, LayerNormCache) {
        let (xhat, inv_std) = Self::normalize(x);
        let gain = p.get(self.gain);
        let bias = p.get(self.bias);
        let y = xhat.iter().zip(gain).zip(bias).map(|((h, g), b)| h * g + b).collect();
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(&self, p: &Params, g: &mut Params, cache: &LayerNormCache, dy: &[f64]) -> Vec<f64> {
        let n = self.dim as f64;
        let gain = p.get(self.gain);
        for (d, (dyv, h)) in g.get_mut(self.gain).iter_mut().zip(dy.iter().zip(&cache.xhat)) {
            *d += dyv * h;
        }
        add_assign(g.get_mut(self.bias), dy);
        let dxhat: Vec<f64> = dy.iter().zip(gain).map(|(a, b)| a * b).collect();
        let mean_d = dxhat.iter().sum::<f64>() / n;
        let mean_dx = dxhat.iter().zip(&cache.xhat).map(|(a, b)| a * b).sum::<f64>() / n;
        dxhat
            .iter()
            .zip(&cache.xhat)
            .map(|(d, h)| cache.inv_std * (d - mean_d - h * mean_dx))
            .collect()
    }
}

/// LSTM cell with gate order (i, f, g, o) stacked in one weight matrix of
/// shape `[4H, D + H]` acting on `[x; h_prev]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w: TensorId,
    pub b: TensorId,
    pub input_dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmStep {
    xh: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
    c_prev: Vec<f64>,
}

impl Lstm {
    pub fn new(p: &mut Params, name: &str, input_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let w = p.add_uniform(format!("{name}.w"), &[4 * hidden, input_dim + hidden], input_dim + hidden, rng);
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let b = p.add(format!("{name}.b"), &[4 * hidden], bias, true);
        Lstm { w, b, input_dim, hidden }
    }

    /// Runs the cell over `xs` from a zero state; returns hidden states.
    pub fn forward(&self, p: &Params, xs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<LstmStep>) {
        let h_dim = self.hidden;
        let cols = self.input_dim + h_dim;
        let w = p.get(self.w);
        let b = p.get(self.b);
        let mut h = vec![0.0; h_dim];
        let mut c = vec![0.0; h_dim];
        let mut hs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let mut xh = Vec::with_capacity(cols);
            xh.extend_from_slice(x);
            xh.extend_from_slice(&h);
            let mut z = vec![0.0; 4 * h_dim];
            matvec(w, 4 * h_dim, cols, &xh, &mut z);
            add_assign(&mut z, b);
            for k in 0..h_dim {
                z[k] = sigmoid(z[k]);
                z[h_dim + k] = sigmoid(z[h_dim + k]);
                z[2 * h_dim + k] = z[2 * h_dim + k].tanh();
                z[3 * h_dim + k] = sigmoid(z[3 * h_dim + k]);
            }
            let c_prev = c.clone();
            for k in 0..h_dim {
                c[k] = z[h_dim + k] * c_prev[k] + z[k] * z[2 * h_dim + k];
                h[k] = z[3 * h_dim + k] * c[k].tanh();
            }
            hs.push(h.clone());
            steps.push(LstmStep {
                xh,
                gates: z,
                c: c.clone(),
                c_prev,
            });
        }
        (hs, steps)
    }

    /// Backpropagation through time; returns gradients w.r.t. the inputs.
    pub fn backward(&self, p: &Params, g: &mut Params, steps: &[LstmStep], dhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let h_dim = self.hidden;
        let cols = self.input_dim + h_dim;
        let w = p.get(self.w);
        let mut dh_next = vec![0.0; h_dim];
        let mut dc_next = vec![0.0; h_dim];
        let mut dxs = vec![Vec::new(); steps.len()];
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            let (i, f, gg, o) = (
                &s.gates[..h_dim],
                &s.gates[h_dim..2 * h_dim],
                &s.gates[2 * h_dim..3 * h_dim],
                &s.gates[3 * h_dim..],
            );
            let mut dz = vec![0.0; 4 * h_dim];
            for k in 0..h_dim {
                let dh = dhs[t][k] + dh_next[k];
                let tc = s.c[k].tanh();
                let dc = dh * o[k] * (1.0 - tc * tc) + dc_next[k];
                dz[k] = dc * gg[k] * i[k] * (1.0 - i[k]);
                dz[h_dim + k] = dc * s.c_prev[k] * f[k] * (1.0 - f[k]);
                dz[2 * h_dim + k] = dc * i[k] * (1.0 - gg[k] * gg[k]);
                dz[3 * h_dim + k] = dh * tc * o[k] * (1.0 - o[k]);
                dc_next[k] = dc * f[k];
            }
            outer_acc(g.get_mut(self.w), &dz, &s.xh);
            add_assign(g.get_mut(self.b), &dz);
            let mut dxh = vec![0.0; cols];
            matvec_t_acc(w, 4 * h_dim, cols, &dz, &mut dxh);
            dh_next.copy_from_slice(&dxh[self.input_dim..]);
            dxh.truncate(self.input_dim);
            dxs[t] = dxh;
        }
        dxs
    }
}

/// Additive attention with a learned context vector:
/// `u_t = tanh(W h_t + b)`, `alpha = softmax(u_t . ctx)`, output `sum alpha_t h_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub w: TensorId,
    pub b: TensorId,
    pub ctx: TensorId,
    pub input_dim: usize,
    pub attn_dim: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    pub us: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

impl Attention {
    pub fn new(p: &mut Params, name: &str, input_dim: usize, attn_dim: usize, rng: &mut Rng) -> Self {
        let w = p.add_uniform(format!("{name}.w"), &[attn_dim, input_dim], input_dim, rng);
        let b = p.add_const(format!("{name}.b"), &[attn_dim], 0.0);
        let ctx = p.add_uniform(format!("{name}.ctx"), &[attn_dim], attn_dim, rng);
        Attention {
            w,
            b,
            ctx,
            input_dim,
            attn_dim,
        }
    }

    pub fn forward(&self, p: &Params, hs: &[Vec<f64>]) -> (Vec<f64>, AttentionCache) {
        let w = p.get(self.w);
        let b = p.get(self.b);
        let ctx = p.get(self.ctx);
        let mut us = Vec::with_capacity(hs.len());
        let mut scores = Vec::with_capacity(hs.len());
        for h in hs {
            let mut u = vec![0.0; self.attn_dim];
            matvec(w, self.attn_dim, self.input_dim, h, &mut u);
            for (uv, bv) in u.iter_mut().zip(b) {
                *uv = (*uv + bv).tanh();
            }
            scores.push(u.iter().zip(ctx).map(|(a, c)| a * c).sum());
            us.push(u);
        }
        let alpha = super::ops::softmax(&scores);
        let mut pooled = vec![0.0; self.input_dim];
        for (a, h) in alpha.iter().zip(hs) {
            for (o, hv) in pooled.iter_mut().zip(h) {
                *o += a * hv;
            }
        }
        (pooled, AttentionCache { us, alpha })
    }

    pub fn backward(&self, p: &Params, g: &mut Params, hs: &[Vec<f64>], cache: &AttentionCache, dpooled: &[f64]) -> Vec<Vec<f64>> {
        let w = p.get(self.w);
        let ctx = p.get(self.ctx).to_vec();
        let dalpha: Vec<f64> = hs.iter().map(|h| h.iter().zip(dpooled).map(|(a, b)| a * b).sum()).collect();
        let weighted: f64 = cache.alpha.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
        let mut dhs = Vec::with_capacity(hs.len());
        for (t, h) in hs.iter().enumerate() {
            let a = cache.alpha[t];
            let ds = a * (dalpha[t] - weighted);
            let u = &cache.us[t];
            for (d, uv) in g.get_mut(self.ctx).iter_mut().zip(u) {
                *d += ds * uv;
            }
            let dpre: Vec<f64> = u.iter().zip(&ctx).map(|(uv, c)| ds * c * (1.0 - uv * uv)).collect();
            outer_acc(g.get_mut(self.w), &dpre, h);
            add_assign(g.get_mut(self.b), &dpre);
            let mut dh: Vec<f64> = dpooled.iter().map(|d| a * d).collect();
            matvec_t_acc(w, self.attn_dim, self.input_dim, &dpre, &mut dh);
            dhs.push(dh);
        }
        dhs
    }
}

/// Inverted dropout mask: kept units are scaled by `1/(1-rate)`.
pub fn dropout_mask(n: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    use rand::Rng as _;
    let keep = 1.0 - rate;
    (0..n).map(|_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
}
