//! Flat parameter buffer plus the tensor layout that addresses it.
//!
//! LSTM gate tensors pack the four gates along the output dimension in
//! `[input, forget, cell, output]` order, so a layer's input projection is
//! `(in, 4H)`, its recurrent projection `(H, 4H)`, and its bias `(4H,)`.

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut2};
use rand::Rng;

use super::{ModelConfig, Real};

/// Addresses one named tensor inside the flat buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorId {
    SrcEmbed,
    TgtEmbed,
    EncW(usize),
    EncU(usize),
    EncB(usize),
    DecW(usize),
    DecU(usize),
    DecB(usize),
    /// Bilinear attention score matrix `(H, H)`.
    AttnScore,
    /// Combines `[context; hidden]` into the attentional state, `(2H, H)`.
    AttnCombine,
    /// Output projection `(H, V_tgt)`.
    OutProj,
    /// Output bias `(V_tgt,)`.
    OutBias,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub id: TensorId,
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub hidden: usize,
    pub layers: usize,
    pub embedding: usize,
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    specs: Vec<TensorSpec>,
    total: usize,
}

impl ParamLayout {
    pub fn new(config: &ModelConfig, src_vocab: usize, tgt_vocab: usize) -> ParamLayout {
        let h = config.hidden_size;
        let e = config.embedding_size;
        let l = config.num_layers;
        let mut specs = Vec::new();
        let mut offset = 0usize;
        let mut push = |id: TensorId, name: String, shape: Vec<usize>| {
            let len: usize = shape.iter().product();
            specs.push(TensorSpec {
                id,
                name,
                shape,
                offset,
                len,
            });
            offset += len;
        };
        push(TensorId::SrcEmbed, "src_embed".into(), vec![src_vocab, e]);
        push(TensorId::TgtEmbed, "tgt_embed".into(), vec![tgt_vocab, e]);
        for layer in 0..l {
            let input = if layer == 0 { e } else { h };
            push(TensorId::EncW(layer), format!("enc{layer}_w"), vec![input, 4 * h]);
            push(TensorId::EncU(layer), format!("enc{layer}_u"), vec![h, 4 * h]);
            push(TensorId::EncB(layer), format!("enc{layer}_b"), vec![4 * h]);
        }
        for layer in 0..l {
            let input = if layer == 0 { e } else { h };
            push(TensorId::DecW(layer), format!("dec{layer}_w"), vec![input, 4 * h]);
            push(TensorId::DecU(layer), format!("dec{layer}_u"), vec![h, 4 * h]);
            push(TensorId::DecB(layer), format!("dec{layer}_b"), vec![4 * h]);
        }
        push(TensorId::AttnScore, "attn_score".into(), vec![h, h]);
        push(TensorId::AttnCombine, "attn_combine".into(), vec![2 * h, h]);
        push(TensorId::OutProj, "out_proj".into(), vec![h, tgt_vocab]);
        push(TensorId::OutBias, "out_bias".into(), vec![tgt_vocab]);
        ParamLayout {
            hidden: h,
            layers: l,
            embedding: e,
            src_vocab,
            tgt_vocab,
            specs,
            total: offset,
        }
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn spec(&self, id: TensorId) -> &TensorSpec {
        self.specs.iter().find(|s| s.id == id).expect("tensor in layout")
    }

    pub fn view2<'a, F: Real>(&self, data: &'a [F], id: TensorId) -> ArrayView2<'a, F> {
        let s = self.spec(id);
        debug_assert_eq!(s.shape.len(), 2);
        ArrayView2::from_shape((s.shape[0], s.shape[1]), &data[s.offset..s.offset + s.len])
            .expect("layout shape")
    }

    pub fn view1<'a, F: Real>(&self, data: &'a [F], id: TensorId) -> ArrayView1<'a, F> {
        let s = self.spec(id);
        debug_assert_eq!(s.shape.len(), 1);
        ArrayView1::from_shape(s.shape[0], &data[s.offset..s.offset + s.len]).expect("layout shape")
    }

    pub fn view2_mut<'a, F: Real>(&self, data: &'a mut [F], id: TensorId) -> ArrayViewMut2<'a, F> {
        let s = self.spec(id);
        debug_assert_eq!(s.shape.len(), 2);
        ArrayViewMut2::from_shape((s.shape[0], s.shape[1]), &mut data[s.offset..s.offset + s.len])
            .expect("layout shape")
    }

    pub fn slice_mut<'a, F: Real>(&self, data: &'a mut [F], id: TensorId) -> &'a mut [F] {
        let s = self.spec(id);
        &mut data[s.offset..s.offset + s.len]
    }

    pub fn slice<'a, F: Real>(&self, data: &'a [F], id: TensorId) -> &'a [F] {
        let s = self.spec(id);
        &data[s.offset..s.offset + s.len]
    }

    /// Fresh buffer with every tensor drawn uniformly from `[-scale, scale]`.
    pub fn init_uniform<F: Real, R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> Vec<F> {
        (0..self.total)
            .map(|_| F::from_f64((rng.random::<f64>() * 2.0 - 1.0) * scale))
            .collect()
    }

    pub fn zeros<F: Real>(&self) -> Vec<F> {
        vec![F::zero(); self.total]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            hidden_size: 6,
            num_layers: 2,
            embedding_size: 5,
            ..ModelConfig::desk_scale()
        }
    }

    #[test]
    fn layout_is_contiguous_and_complete() {
        let layout = ParamLayout::new(&tiny_config(), 11, 9);
        let mut expected_offset = 0;
        for s in layout.specs() {
            assert_eq!(s.offset, expected_offset);
            assert_eq!(s.len, s.shape.iter().product::<usize>());
            expected_offset += s.len;
        }
        assert_eq!(layout.total_len(), expected_offset);
        // 2 embeddings + 2 layers x 3 tensors x 2 networks + 4 head tensors.
        assert_eq!(layout.specs().len(), 2 + 12 + 4);
    }

    #[test]
    fn views_address_the_right_regions() {
        let layout = ParamLayout::new(&tiny_config(), 11, 9);
        let mut data: Vec<f64> = (0..layout.total_len()).map(|i| i as f64).collect();
        let spec = layout.spec(TensorId::AttnScore).clone();
        let v = layout.view2(&data, TensorId::AttnScore);
        assert_eq!(v.shape(), &[6, 6]);
        assert_eq!(v[[0, 0]], spec.offset as f64);
        {
            let mut m = layout.view2_mut(&mut data, TensorId::AttnScore);
            m[[0, 0]] = -1.0;
        }
        assert_eq!(data[spec.offset], -1.0);
    }

    #[test]
    fn layer_input_dims_chain_embedding_to_hidden() {
        let layout = ParamLayout::new(&tiny_config(), 11, 9);
        assert_eq!(layout.spec(TensorId::EncW(0)).shape, vec![5, 24]);
        assert_eq!(layout.spec(TensorId::EncW(1)).shape, vec![6, 24]);
        assert_eq!(layout.spec(TensorId::DecW(0)).shape, vec![5, 24]);
        assert_eq!(layout.spec(TensorId::AttnCombine).shape, vec![12, 6]);
        assert_eq!(layout.spec(TensorId::OutProj).shape, vec![6, 9]);
    }
}
