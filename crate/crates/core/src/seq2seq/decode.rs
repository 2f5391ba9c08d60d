//! Greedy decoding: argmax token per step, fed back until the end token or
//! the length cap.

use ndarray::{s, Array1};

use super::params::TensorId;
use super::vocab::{EOS, PAD, SOS};
use super::{sigmoid, tanh, Model, Real, Seq2SeqError};

/// Decoded token ids (start/end tokens stripped) plus a truncation flag set
/// when the length cap fired before an end token appeared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub tokens: Vec<usize>,
    pub truncated: bool,
}

impl<F: Real> Model<F> {
    /// Greedily decodes `src`, emitting at most `max_len` tokens. Pad and
    /// start-of-sequence are never emitted; ties resolve to the lowest
    /// index, so the result is deterministic.
    pub fn greedy_decode(&self, src: &[usize], max_len: usize) -> Result<Decoded, Seq2SeqError> {
        let encoding = self.encode(src)?;
        let layout = &self.layout;
        let h = layout.hidden;
        let mut hidden: Vec<Array1<F>> = Vec::with_capacity(layout.layers);
        let mut cell: Vec<Array1<F>> = Vec::with_capacity(layout.layers);
        for (hf, cf) in &encoding.finals {
            hidden.push(hf.clone());
            cell.push(cf.clone());
        }
        let embed = layout.view2(&self.params, TensorId::TgtEmbed);
        let wc = layout.view2(&self.params, TensorId::AttnCombine);
        let wo = layout.view2(&self.params, TensorId::OutProj);
        let bo = layout.view1(&self.params, TensorId::OutBias);
        let mut tokens = Vec::new();
        let mut prev = SOS;
        for _ in 0..max_len {
            let mut x = embed.row(prev).to_owned();
            for l in 0..layout.layers {
                let w = layout.view2(&self.params, TensorId::DecW(l));
                let u = layout.view2(&self.params, TensorId::DecU(l));
                let b = layout.view1(&self.params, TensorId::DecB(l));
                let mut a = x.dot(&w) + hidden[l].dot(&u);
                a += &b;
                let gi = a.slice(s![0..h]).mapv(sigmoid);
                let gf = a.slice(s![h..2 * h]).mapv(sigmoid);
                let gg = a.slice(s![2 * h..3 * h]).mapv(tanh);
                let go = a.slice(s![3 * h..4 * h]).mapv(sigmoid);
                let c = &gf * &cell[l] + &gi * &gg;
                let tc = c.mapv(tanh);
                hidden[l] = &go * &tc;
                cell[l] = c;
                x = hidden[l].clone();
            }
            let (ctx, _) = self.attend(hidden.last().expect("layers").view(), encoding.states.view());
            let mut cat = Array1::<F>::zeros(2 * h);
            cat.slice_mut(s![0..h]).assign(&ctx);
            cat.slice_mut(s![h..2 * h]).assign(hidden.last().expect("layers"));
            let htilde = cat.dot(&wc).mapv(tanh);
            let mut logits = htilde.dot(&wo);
            logits += &bo;
            logits[PAD] = F::neg_infinity();
            logits[SOS] = F::neg_infinity();
            let next = logits
                .indexed_iter()
                .fold((0usize, F::neg_infinity()), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                })
                .0;
            if next == EOS {
                return Ok(Decoded {
                    tokens,
                    truncated: false,
                });
            }
            tokens.push(next);
            prev = next;
        }
        Ok(Decoded {
            tokens,
            truncated: true,
        })
    }
}
