//! Central finite-difference verification of the analytic gradients, run in
//! f64 on a deliberately tiny model so every parameter can be perturbed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Batch, Model};
use super::ModelConfig;

const EPSILON: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error across every parameter element.
    pub max_rel_error: f64,
    /// Worst relative error per named tensor.
    pub per_tensor: Vec<(String, f64)>,
    /// Analytic gradient of an embedding row absent from the batch; must be
    /// exactly zero.
    pub unused_embedding_grad: f64,
}

fn tiny_setup() -> (Model<f64>, Batch, usize) {
    let config = ModelConfig {
        hidden_size: 6,
        num_layers: 2,
        embedding_size: 5,
        batch_size: 3,
        seed: 42,
        ..ModelConfig::desk_scale()
    };
    let src_vocab = 11;
    let tgt_vocab = 9;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model: Model<f64> = Model::new_random(config, src_vocab, tgt_vocab, &mut rng);
    // Larger weights than the training default so gradients are well away
    // from the finite-difference noise floor.
    model.params = model.layout.init_uniform(0.5, &mut rng);
    // Variable lengths exercise padding, masking, and the final-state
    // gather. Source token 10 and target token 8 stay unused on purpose.
    let srcs: Vec<Vec<usize>> = vec![vec![4, 5, 6, 7, 8], vec![9, 4], vec![6, 6, 9, 5]];
    let tgts: Vec<Vec<usize>> = vec![vec![4, 5, 6, 7], vec![5], vec![7, 6, 4]];
    let pairs: Vec<(&[usize], &[usize])> = srcs
        .iter()
        .zip(tgts.iter())
        .map(|(s, t)| (s.as_slice(), t.as_slice()))
        .collect();
    let batch = Batch::new(&pairs);
    let tokens = batch.n_tokens;
    (model, batch, tokens)
}

/// Compares analytic gradients of the mean per-token loss against central
/// finite differences for every parameter element.
pub fn gradient_check() -> GradCheckReport {
    let (mut model, batch, tokens) = tiny_setup();
    let out = model.forward_backward(&batch);
    let scale = 1.0 / tokens as f64;
    let analytic: Vec<f64> = out.grads.iter().map(|g| g * scale).collect();

    let mut per_tensor = Vec::new();
    let mut max_rel = 0.0f64;
    let specs: Vec<_> = model.layout.specs().to_vec();
    for spec in &specs {
        let mut tensor_max = 0.0f64;
        for k in spec.offset..spec.offset + spec.len {
            let saved = model.params[k];
            model.params[k] = saved + EPSILON;
            let (lp, _) = model.forward_loss(&batch);
            model.params[k] = saved - EPSILON;
            let (lm, _) = model.forward_loss(&batch);
            model.params[k] = saved;
            let numeric = (lp - lm) * scale / (2.0 * EPSILON);
            let a = analytic[k];
            let rel = (a - numeric).abs() / f64::max(1e-6, a.abs().max(numeric.abs()));
            tensor_max = tensor_max.max(rel);
        }
        per_tensor.push((spec.name.clone(), tensor_max));
        max_rel = max_rel.max(tensor_max);
    }

    // Token 10 never appears in any source; its embedding rows must carry
    // exactly zero analytic gradient.
    let src_spec = model.layout.spec(super::params::TensorId::SrcEmbed);
    let e = model.layout.embedding;
    let unused = &analytic[src_spec.offset + 10 * e..src_spec.offset + 11 * e];
    let unused_embedding_grad = unused.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    GradCheckReport {
        max_rel_error: max_rel,
        per_tensor,
        unused_embedding_grad,
    }
}
