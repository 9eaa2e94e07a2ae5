//! Trained classifiers for one characteristic: training entry points,
//! probability output and the binary container.

pub mod container;

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{stratified_split, LabeledText};
use crate::featurize::{corpus_fingerprint, SparseVector, VocabConfig, Vocabulary};
use crate::linear::{train_linear, LinearConfig, LinearModel};
use crate::neural::{train_network, CharCnn, CharCnnConfig, Network, Params, SeqNet, SeqNetConfig, Tensor, TrainConfig, TrainLog};
use crate::{sha256_hex, Characteristic, Error, Result};
use container::Container;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "ngsvm")]
    NgSvm,
    #[serde(rename = "ccnn")]
    CharCnn,
    #[serde(rename = "seqnet")]
    SeqNet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::NgSvm, ModelKind::CharCnn, ModelKind::SeqNet];

    pub fn key(self) -> &'static str {
        match self {
            ModelKind::NgSvm => "ngsvm",
            ModelKind::CharCnn => "ccnn",
            ModelKind::SeqNet => "seqnet",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        match norm.as_str() {
            "ngsvm" | "svm" | "linear" => Ok(ModelKind::NgSvm),
            "ccnn" | "charcnn" => Ok(ModelKind::CharCnn),
            "seqnet" => Ok(ModelKind::SeqNet),
            _ => Err(format!("unknown model kind {s:?} (expected ngsvm, ccnn or seqnet)")),
        }
    }
}

/// Anything that scores texts for one characteristic.
pub trait TextClassifier: Send + Sync {
    fn task(&self) -> Characteristic;

    /// Probability of the `yes` class.
    fn prob_yes(&self, text: &str) -> Result<f64>;

    /// Stable identifier of the model parameters.
    fn fingerprint(&self) -> &str;

    /// Label under the 0.5 threshold.
    fn predict(&self, text: &str) -> Result<bool> {
        Ok(self.prob_yes(text)? >= 0.5)
    }
}

/// Configuration for every model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab: VocabConfig,
    pub linear: LinearConfig,
    pub ccnn: CharCnnConfig,
    pub seqnet: SeqNetConfig,
    pub train: TrainConfig,
}

impl ModelConfig {
    /// Sets the seed of every component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.linear.seed = seed;
        self.ccnn.seed = seed;
        self.seqnet.seed = seed;
        self.train.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub n_train: usize,
    pub n_dev: usize,
    pub data_fingerprint: String,
}

#[derive(Debug, Clone)]
pub enum Inner {
    NgSvm { vocab: Vocabulary, model: LinearModel },
    CharCnn { net: CharCnn, log: TrainLog },
    SeqNet { net: SeqNet, log: TrainLog },
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub task: Characteristic,
    pub info: TrainingInfo,
    pub inner: Inner,
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum Body {
    Ngsvm {
        config: LinearConfig,
        vocabulary: String,
        bias: f64,
        calibration: crate::linear::Calibration,
        objective_log: Vec<f64>,
    },
    Ccnn {
        config: CharCnnConfig,
        charset: String,
        log: TrainLog,
    },
    Seqnet {
        config: SeqNetConfig,
        vocab: Vec<String>,
        embed_dim: usize,
        log: TrainLog,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    task: Characteristic,
    training: TrainingInfo,
    body: Body,
}

fn dev_split(data: &[LabeledText], fraction: f64, seed: u64) -> Result<(Vec<LabeledText>, Vec<LabeledText>)> {
    let dev_size = ((data.len() as f64 * fraction).round() as usize).max(2);
    let split = stratified_split(data, |t| t.label, dev_size, seed).map_err(|e| Error::DegenerateTraining(e.to_string()))?;
    Ok(split.select(data))
}

/// Trains one model on labelled texts for `task`.
///
/// The linear model is fit on all but a stratified dev fraction
/// (`config.train.dev_fraction`), on which its sigmoid is calibrated. The
/// neural models carve the same fraction for early stopping.
pub fn train_model(kind: ModelKind, task: Characteristic, data: &[LabeledText], config: &ModelConfig) -> Result<TrainedModel> {
    config.train.validate()?;
    let yes = data.iter().filter(|t| t.label).count();
    if yes == 0 || yes == data.len() {
        return Err(Error::DegenerateTraining(format!(
            "{task}: both classes required ({yes} yes of {})",
            data.len()
        )));
    }
    if data.len() < 20 {
        return Err(Error::DegenerateTraining(format!(
            "{task}: need at least 20 labelled texts, got {}",
            data.len()
        )));
    }
    let texts: Vec<&str> = data.iter().map(|t| t.text.as_str()).collect();
    let data_fingerprint = corpus_fingerprint(
        &data
            .iter()
            .map(|t| format!("{}\u{1f}{}\u{1f}{}", t.id, t.label, t.text))
            .collect::<Vec<_>>(),
    );
    let (inner, n_train, n_dev) = match kind {
        ModelKind::NgSvm => {
            let (train, dev) = dev_split(data, config.train.dev_fraction, config.linear.seed)?;
            let train_texts: Vec<&str> = train.iter().map(|t| t.text.as_str()).collect();
            let vocab = Vocabulary::build(&train_texts, config.vocab.clone())?;
            let vecs =
                |set: &[LabeledText]| -> Vec<(SparseVector, bool)> { set.iter().map(|t| (vocab.vectorize(&t.text), t.label)).collect() };
            let model = train_linear(&vecs(&train), &config.linear)?.calibrate(&vecs(&dev))?;
            (Inner::NgSvm { vocab, model }, train.len(), dev.len())
        }
        ModelKind::CharCnn => {
            let net = CharCnn::new(config.ccnn.clone(), &texts)?;
            let (net, log) = train_network(net, data, &config.train)?;
            let (nt, nd) = (log.train_size, log.dev_size);
            (Inner::CharCnn { net, log }, nt, nd)
        }
        ModelKind::SeqNet => {
            let net = SeqNet::new(config.seqnet.clone(), &texts)?;
            let (net, log) = train_network(net, data, &config.train)?;
            let (nt, nd) = (log.train_size, log.dev_size);
            (Inner::SeqNet { net, log }, nt, nd)
        }
    };
    let mut model = TrainedModel {
        task,
        info: TrainingInfo {
            n_train,
            n_dev,
            data_fingerprint,
        },
        inner,
        fingerprint: String::new(),
    };
    model.fingerprint = sha256_hex(&model.to_bytes());
    Ok(model)
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.inner {
            Inner::NgSvm { .. } => ModelKind::NgSvm,
            Inner::CharCnn { .. } => ModelKind::CharCnn,
            Inner::SeqNet { .. } => ModelKind::SeqNet,
        }
    }

    /// Per-epoch log of a neural model.
    pub fn train_log(&self) -> Option<&TrainLog> {
        match &self.inner {
            Inner::NgSvm { .. } => None,
            Inner::CharCnn { log, .. } | Inner::SeqNet { log, .. } => Some(log),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (body, tensors) = match &self.inner {
            Inner::NgSvm { vocab, model } => (
                Body::Ngsvm {
                    config: model.config.clone(),
                    vocabulary: vocab.to_json(),
                    bias: model.bias,
                    calibration: model.calibration,
                    objective_log: model.objective_log.clone(),
                },
                vec![Tensor {
                    name: "weights".into(),
                    shape: vec![model.weights.len()],
                    data: model.weights.clone(),
                    trainable: true,
                }],
            ),
            Inner::CharCnn { net, log } => (
                Body::Ccnn {
                    config: net.config.clone(),
                    charset: net.charset().iter().collect(),
                    log: log.clone(),
                },
                net.params().tensors.clone(),
            ),
            Inner::SeqNet { net, log } => (
                Body::Seqnet {
                    config: net.config.clone(),
                    vocab: net.vocab().to_vec(),
                    embed_dim: net.embed_dim,
                    log: log.clone(),
                },
                net.params().tensors.clone(),
            ),
        };
        let header = Header {
            task: self.task,
            training: self.info.clone(),
            body,
        };
        Container {
            kind: self.kind().code(),
            header: serde_json::to_vec(&header).expect("header serializes"),
            tensors,
        }
        .encode(self.kind() == ModelKind::NgSvm)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = Container::decode(bytes)?;
        let header: Header = serde_json::from_slice(&c.header).map_err(|e| Error::Container(format!("bad header: {e}")))?;
        let bad_kind = || Error::Container(format!("kind code {} does not match header", c.kind));
        let inner = match header.body {
            Body::Ngsvm {
                config,
                vocabulary,
                bias,
                calibration,
                objective_log,
            } => {
                if c.kind != ModelKind::NgSvm.code() {
                    return Err(bad_kind());
                }
                let vocab = Vocabulary::from_json(&vocabulary)?;
                let [w]: [Tensor; 1] = c
                    .tensors
                    .try_into()
                    .map_err(|_| Error::Container("linear model needs exactly one tensor".into()))?;
                if w.name != "weights" || w.shape != [vocab.dim()] {
                    return Err(Error::DimensionMismatch {
                        expected: vocab.dim(),
                        actual: w.data.len(),
                    });
                }
                if !(calibration.a > 0.0 && calibration.a.is_finite() && calibration.b.is_finite() && bias.is_finite()) {
                    return Err(Error::Container("invalid calibration or bias".into()));
                }
                let model = LinearModel {
                    weights: w.data,
                    bias,
                    calibration,
                    config,
                    objective_log,
                };
                Inner::NgSvm { vocab, model }
            }
            Body::Ccnn { config, charset, log } => {
                if c.kind != ModelKind::CharCnn.code() {
                    return Err(bad_kind());
                }
                let mut net = CharCnn::with_charset(config, charset.chars().collect())?;
                net.set_params(Params { tensors: c.tensors })?;
                Inner::CharCnn { net, log }
            }
            Body::Seqnet {
                config,
                vocab,
                embed_dim,
                log,
            } => {
                if c.kind != ModelKind::SeqNet.code() {
                    return Err(bad_kind());
                }
                if embed_dim == 0 || embed_dim > container::MAX_TENSOR_LEN {
                    return Err(Error::Container(format!("bad embedding dimension {embed_dim}")));
                }
                let mut net = SeqNet::with_vocab(config, vocab, embed_dim)?;
                net.set_params(Params { tensors: c.tensors })?;
                Inner::SeqNet { net, log }
            }
        };
        Ok(TrainedModel {
            task: header.task,
            info: header.training,
            inner,
            fingerprint: sha256_hex(bytes),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// `P(yes)` for each text.
    pub fn prob_yes_batch<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<f64>> {
        texts.iter().map(|t| self.prob_yes(t.as_ref())).collect()
    }
}

impl TextClassifier for TrainedModel {
    fn task(&self) -> Characteristic {
        self.task
    }

    fn prob_yes(&self, text: &str) -> Result<f64> {
        match &self.inner {
            Inner::NgSvm { vocab, model } => model.probability(&vocab.vectorize(text)),
            Inner::CharCnn { net, .. } => net.prob_yes(text),
            Inner::SeqNet { net, .. } => net.prob_yes(text),
        }
    }

    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, Difficulty, GoldPolicy};

    fn data(task: Characteristic, n: usize) -> Vec<LabeledText> {
        let corpus = generate_synthetic(3, n, 1.0).unwrap();
        crate::corpus::derive_gold(&corpus, GoldPolicy::PerfectOnly)
            .unwrap()
            .iter()
            .filter_map(|g| g.labeled(task))
            .collect()
    }

    fn small_config() -> ModelConfig {
        let mut c = ModelConfig::default().with_seed(1);
        c.ccnn.filters_per_kernel = 4;
        c.ccnn.max_len = 60;
        c.seqnet.hidden_dim = 4;
        c.seqnet.attention_dim = 4;
        c.seqnet.dense_dims = vec![4, 4, 2];
        c.train.max_epochs = 2;
        c
    }

    #[test]
    fn every_kind_round_trips_through_bytes() {
        let d = data(Characteristic::Emotionality, 60);
        for kind in ModelKind::ALL {
            let m = train_model(kind, Characteristic::Emotionality, &d, &small_config()).unwrap();
            let bytes = m.to_bytes();
            let back = TrainedModel::from_bytes(&bytes).unwrap();
            assert_eq!(back.kind(), kind);
            assert_eq!(back.fingerprint(), m.fingerprint());
            assert_eq!(back.to_bytes(), bytes);
            for t in &d[..5] {
                assert_eq!(back.prob_yes(&t.text).unwrap(), m.prob_yes(&t.text).unwrap());
            }
        }
    }

    #[test]
    fn training_is_byte_deterministic() {
        let d = data(Characteristic::ActionSeeking, 60);
        for kind in ModelKind::ALL {
            let a = train_model(kind, Characteristic::ActionSeeking, &d, &small_config()).unwrap();
            let b = train_model(kind, Characteristic::ActionSeeking, &d, &small_config()).unwrap();
            assert_eq!(a.to_bytes(), b.to_bytes(), "{kind}");
        }
    }

    #[test]
    fn rejects_single_class_and_tiny_sets() {
        let mut d = data(Characteristic::Emotionality, 60);
        d.iter_mut().for_each(|t| t.label = true);
        assert!(matches!(
            train_model(ModelKind::NgSvm, Characteristic::Emotionality, &d, &small_config()),
            Err(Error::DegenerateTraining(_))
        ));
        let few: Vec<LabeledText> = (0..10)
            .map(|i| LabeledText {
                id: i.to_string(),
                text: format!("text {i}"),
                label: i % 2 == 0,
                difficulty: Difficulty::Unknown,
            })
            .collect();
        assert!(train_model(ModelKind::SeqNet, Characteristic::Emotionality, &few, &small_config()).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("ngsvm".parse::<ModelKind>().unwrap(), ModelKind::NgSvm);
        assert_eq!("c-CNN".parse::<ModelKind>().unwrap(), ModelKind::CharCnn);
        assert!("bert".parse::<ModelKind>().is_err());
    }
}
