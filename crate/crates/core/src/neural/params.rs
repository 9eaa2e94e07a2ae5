use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// A named parameter tensor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub trainable: bool,
}

/// Index of a tensor inside [`Params`].
pub type TensorId = usize;

/// Flat list of parameter tensors. Gradients use the same layout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub tensors: Vec<Tensor>,
}

impl Params {
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f64>, trainable: bool) -> TensorId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(Tensor {
            name: name.into(),
            shape: shape.to_vec(),
            data,
            trainable,
        });
        self.tensors.len() - 1
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn add_uniform(&mut self, name: impl Into<String>, shape: &[usize], fan_in: usize, rng: &mut Rng) -> TensorId {
        let r = 1.0 / (fan_in.max(1) as f64).sqrt();
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-r..=r)).collect();
        self.add(name, shape, data, true)
    }

    pub fn add_const(&mut self, name: impl Into<String>, shape: &[usize], value: f64) -> TensorId {
        let n = shape.iter().product();
        self.add(name, shape, vec![value; n], true)
    }

    pub fn get(&self, id: TensorId) -> &[f64] {
        &self.tensors[id].data
    }

    pub fn get_mut(&mut self, id: TensorId) -> &mut [f64] {
        &mut self.tensors[id].data
    }

    pub fn zeros_like(&self) -> Params {
        Params {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor {
                    data: vec![0.0; t.data.len()],
                    ..t.clone()
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .filter(|t| t.trainable)
            .flat_map(|t| t.data.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn n_trainable(&self) -> usize {
        self.tensors.iter().filter(|t| t.trainable).map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }
}
