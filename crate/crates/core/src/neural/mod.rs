//! Neural text classifiers with hand-written backpropagation.
//!
//! Two architectures are provided: [`CharCnn`], a character-embedding
//! convolutional network with parallel kernel-size branches, and [`SeqNet`],
//! a token-embedding BiLSTM with attention pooling and a dense head. Both
//! output a 2-way softmax where index 1 is the `yes` class.

pub mod ccnn;
pub mod embeddings;
pub mod gradcheck;
pub mod layers;
pub mod ops;
pub mod params;
pub mod seqnet;
pub mod train;

pub use ccnn::{CharCnn, CharCnnConfig};
pub use embeddings::StaticEmbeddings;
pub use gradcheck::{grad_check, GradCheckReport, NeuralKind};
pub use params::{Params, Tensor, TensorId};
pub use seqnet::{EmbeddingProvider, SeqNet, SeqNetConfig};
pub use train::{train_network, EarlyStopping, EpochLog, TrainConfig, TrainLog};

use crate::rng::Rng;
use crate::Result;

/// A differentiable binary classifier.
pub trait Network: Clone {
    type Input: Clone;

    fn encode(&self, text: &str) -> Result<Self::Input>;

    fn params(&self) -> &Params;

    fn params_mut(&mut self) -> &mut Params;

    /// Class probabilities `[P(no), P(yes)]`, without dropout.
    fn probs(&self, input: &Self::Input) -> [f64; 2];

    /// Mean cross-entropy over `batch` (label 1 = yes). Dropout is applied
    /// when `dropout` is given; gradients of the mean loss are added to
    /// `grads` when given.
    fn batch_loss(&self, batch: &[(&Self::Input, usize)], dropout: Option<&mut Rng>, grads: Option<&mut Params>) -> f64;

    /// Smallest distance of any ReLU input or max-pool runner-up from its
    /// switch point on `input`.
    fn kink_margin(&self, _input: &Self::Input) -> f64 {
        f64::INFINITY
    }

    fn prob_yes(&self, text: &str) -> Result<f64> {
        Ok(self.probs(&self.encode(text)?)[1])
    }
}

/// Copies tensor data from `src` into `dst`, checking names and shapes.
pub(crate) fn load_params(dst: &mut Params, src: Params) -> Result<()> {
    if dst.tensors.len() != src.tensors.len() {
        return Err(crate::Error::Container(format!(
            "expected {} tensors, found {}",
            dst.tensors.len(),
            src.tensors.len()
        )));
    }
    for (d, s) in dst.tensors.iter_mut().zip(src.tensors) {
        if d.name != s.name || d.shape != s.shape {
            return Err(crate::Error::Container(format!(
                "tensor {} {:?} does not match {} {:?}",
                s.name, s.shape, d.name, d.shape
            )));
        }
        d.data = s.data;
    }
    Ok(())
}
