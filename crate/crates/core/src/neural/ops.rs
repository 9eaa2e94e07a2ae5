//! Dense kernels on row-major slices.

/// `out = W x` for `W` of shape `[rows, cols]`.
pub fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    for (r, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[r * cols..(r + 1) * cols];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

/// `out += W^T g`.
pub fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, g: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let gr = g[r];
        if gr == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += gr * a;
        }
    }
}

/// `dw += g x^T`.
pub fn outer_acc(dw: &mut [f64], g: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, &gr) in g.iter().enumerate() {
        if gr == 0.0 {
            continue;
        }
        let row = &mut dw[r * cols..(r + 1) * cols];
        for (d, xv) in row.iter_mut().zip(x) {
            *d += gr * xv;
        }
    }
}

pub fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy `-log softmax(logits)[target]`, computed stably.
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

pub fn sigmoid(z: f64) -> f64 {
    crate::linear::sigmoid(z)
}
