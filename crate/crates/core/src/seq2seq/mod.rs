//! Encoder-decoder with attention, built from scratch on dense `ndarray`
//! math: embedding lookups, multi-layer LSTM encoder and decoder, a bilinear
//! global attention over encoder states, cross-entropy training with full
//! teacher forcing, and greedy decoding.
//!
//! Parameters live in one flat buffer addressed through a [`ParamLayout`];
//! gradients share the layout, which keeps the optimizer, checkpoint format,
//! and finite-difference checks uniform across every tensor.

mod checkpoint;
mod decode;
mod gradcheck;
mod model;
mod params;
mod train;
mod vocab;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use decode::Decoded;
pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{Batch, Encoding, Model};
pub use params::{ParamLayout, TensorId};
pub use train::TrainLog;
pub use vocab::{Vocabulary, EOS, PAD, SOS, UNK};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Seq2SeqError {
    #[error("token `{0}` is not in the closed vocabulary")]
    OutOfVocab(String),
    #[error("index {index} out of range for vocabulary of {vocab_len}")]
    BadIndex { index: usize, vocab_len: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}; lower the learning rate")]
    NanLoss { epoch: usize, batch: usize },
    #[error("bad model configuration: {0}")]
    BadConfig(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Architecture and optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub num_layers: usize,
    pub embedding_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_decode_length: usize,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 300,
            num_layers: 2,
            embedding_size: 64,
            epochs: 50,
            learning_rate: 1e-2,
            batch_size: 32,
            max_decode_length: 32,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Small configuration that keeps full runs cheap on a single machine.
    pub fn desk_scale() -> ModelConfig {
        ModelConfig {
            hidden_size: 64,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), Seq2SeqError> {
        let fields = [
            ("hidden_size", self.hidden_size),
            ("num_layers", self.num_layers),
            ("embedding_size", self.embedding_size),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("max_decode_length", self.max_decode_length),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Seq2SeqError::BadConfig(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0) {
            return Err(Seq2SeqError::BadConfig("learning_rate must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Seq2SeqError::BadConfig("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// Float abstraction so training runs in f32 while numerical verification
/// runs the identical code in f64.
pub trait Real: ndarray::NdFloat {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(v: f64) -> f32 {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> f64 {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

#[inline]
pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// tanh through the sigmoid identity; its derivative in terms of the output
/// is exactly `1 - t^2`, which the backward pass relies on.
#[inline]
pub(crate) fn tanh<F: Real>(x: F) -> F {
    let two = F::from_f64(2.0);
    two * sigmoid(two * x) - F::one()
}
