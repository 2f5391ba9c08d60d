//! Training loop: shuffled mini-batches, teacher forcing, global-norm
//! clipping, Adam.
//!
//! Each mini-batch splits into fixed-size chunks whose forward/backward
//! passes run in parallel; gradients reduce in chunk-index order, so results
//! are bit-identical regardless of how many worker threads exist.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{Batch, Model};
use super::{ModelConfig, Real, Seq2SeqError};

/// Examples per parallel work unit. Fixed so the reduction order (and thus
/// every float) does not depend on the machine's core count.
const CHUNK: usize = 16;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    /// Mean per-token loss of the untrained model over the training set.
    pub initial_loss: f64,
    /// Mean per-token loss per epoch, in epoch order; length equals the
    /// configured epoch count.
    pub epoch_losses: Vec<f64>,
}

struct Adam<F: Real> {
    m: Vec<F>,
    v: Vec<F>,
    t: u64,
    lr: f64,
}

impl<F: Real> Adam<F> {
    fn new(len: usize, lr: f64) -> Adam<F> {
        Adam {
            m: vec![F::zero(); len],
            v: vec![F::zero(); len],
            t: 0,
            lr,
        }
    }

    fn update(&mut self, params: &mut [F], grads: &[F]) {
        self.t += 1;
        let b1 = F::from_f64(BETA1);
        let b2 = F::from_f64(BETA2);
        let one = F::one();
        let bc1 = F::from_f64(1.0 - BETA1.powi(self.t as i32));
        let bc2 = F::from_f64(1.0 - BETA2.powi(self.t as i32));
        let lr = F::from_f64(self.lr);
        let eps = F::from_f64(ADAM_EPS);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] = params[i] - lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// Scales `grads` in place by `1/n_tokens` and then by the global-norm clip
/// factor; returns the pre-clip norm.
pub(crate) fn normalize_and_clip<F: Real>(grads: &mut [F], n_tokens: usize, clip: f64) -> f64 {
    let scale = 1.0 / n_tokens as f64;
    let mut sq = 0.0f64;
    for g in grads.iter_mut() {
        *g = *g * F::from_f64(scale);
        let v = g.to_f64();
        sq += v * v;
    }
    let norm = sq.sqrt();
    if norm > clip {
        let factor = F::from_f64(clip / norm);
        for g in grads.iter_mut() {
            *g = *g * factor;
        }
    }
    norm
}

fn chunk_batches<'a>(
    pairs: &'a [(Vec<usize>, Vec<usize>)],
    order: &'a [usize],
) -> Vec<Vec<(&'a [usize], &'a [usize])>> {
    order
        .chunks(CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&i| (pairs[i].0.as_slice(), pairs[i].1.as_slice()))
                .collect()
        })
        .collect()
}

/// Token-summed loss over the whole set, evaluated chunk-parallel.
pub fn evaluate_loss<F: Real>(model: &Model<F>, pairs: &[(Vec<usize>, Vec<usize>)]) -> f64 {
    let order: Vec<usize> = (0..pairs.len()).collect();
    let chunks = chunk_batches(pairs, &order);
    let results: Vec<(f64, usize)> = chunks
        .par_iter()
        .map(|chunk| {
            let batch = Batch::new(chunk);
            model.forward_loss(&batch)
        })
        .collect();
    let loss: f64 = results.iter().map(|(l, _)| l).sum();
    let tokens: usize = results.iter().map(|(_, n)| n).sum();
    loss / tokens as f64
}

impl<F: Real> Model<F> {
    /// Trains a fresh model on `(source ids, target ids)` pairs. The
    /// callback sees `(epoch, mean loss)` after every epoch.
    pub fn train(
        config: &ModelConfig,
        src_vocab: usize,
        tgt_vocab: usize,
        pairs: &[(Vec<usize>, Vec<usize>)],
        mut on_epoch: impl FnMut(usize, f64),
    ) -> Result<(Model<F>, TrainLog), Seq2SeqError> {
        config.validate()?;
        if pairs.is_empty() {
            return Err(Seq2SeqError::EmptyTrainingSet);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut model: Model<F> = Model::new_random(config.clone(), src_vocab, tgt_vocab, &mut rng);
        let initial_loss = evaluate_loss(&model, pairs);
        let mut adam = Adam::<F>::new(model.params.len(), config.learning_rate);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut epoch_losses = Vec::with_capacity(config.epochs);
        for epoch in 1..=config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss_sum = 0.0f64;
            let mut epoch_tokens = 0usize;
            for (batch_idx, batch_order) in order.chunks(config.batch_size).enumerate() {
                let chunks = chunk_batches(pairs, batch_order);
                let outs: Vec<_> = chunks
                    .par_iter()
                    .map(|chunk| {
                        let batch = Batch::new(chunk);
                        model.forward_backward(&batch)
                    })
                    .collect();
                // Ordered reduction.
                let mut grads = vec![F::zero(); model.params.len()];
                let mut loss_sum = 0.0f64;
                let mut tokens = 0usize;
                for out in outs {
                    loss_sum += out.loss_sum;
                    tokens += out.tokens;
                    for (g, o) in grads.iter_mut().zip(out.grads.iter()) {
                        *g = *g + *o;
                    }
                }
                if !loss_sum.is_finite() {
                    return Err(Seq2SeqError::NanLoss {
                        epoch,
                        batch: batch_idx,
                    });
                }
                normalize_and_clip(&mut grads, tokens, config.clip_norm);
                adam.update(&mut model.params, &grads);
                epoch_loss_sum += loss_sum;
                epoch_tokens += tokens;
            }
            let mean = epoch_loss_sum / epoch_tokens as f64;
            epoch_losses.push(mean);
            on_epoch(epoch, mean);
        }
        Ok((
            model,
            TrainLog {
                initial_loss,
                epoch_losses,
            },
        ))
    }
}
