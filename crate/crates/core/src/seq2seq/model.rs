//! Batched forward and backward passes.
//!
//! Sequence tensors are laid out `(T, B, D)` so each time step is one
//! contiguous `(B, D)` block. Input projections run as a single flattened
//! `(T*B, in) x (in, 4H)` product per layer; only the recurrent term is
//! per-step. The backward pass mirrors that split, so most of the work lands
//! in a handful of large matrix products.

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;

use super::params::{ParamLayout, TensorId};
use super::vocab::{EOS, PAD, SOS};
use super::{sigmoid, tanh, ModelConfig, Real, Seq2SeqError};

const MASKED_SCORE: f64 = -1e30;

/// Padded batch in `(T, B)` index layout.
#[derive(Debug, Clone)]
pub struct Batch {
    pub src: Array2<usize>,
    pub src_len: Vec<usize>,
    pub tgt_in: Array2<usize>,
    pub tgt_out: Array2<usize>,
    /// Real (non-pad) target positions, the loss denominator.
    pub n_tokens: usize,
}

impl Batch {
    /// Builds a padded batch from `(source ids, target ids)` pairs. Targets
    /// gain a start token on the input side and an end token on the output
    /// side.
    pub fn new(pairs: &[(&[usize], &[usize])]) -> Batch {
        let b = pairs.len();
        assert!(b > 0, "batch must be non-empty");
        let ts = pairs.iter().map(|(s, _)| s.len()).max().unwrap();
        let tt = pairs.iter().map(|(_, t)| t.len()).max().unwrap() + 1;
        let mut src = Array2::from_elem((ts, b), PAD);
        let mut tgt_in = Array2::from_elem((tt, b), PAD);
        let mut tgt_out = Array2::from_elem((tt, b), PAD);
        let mut src_len = Vec::with_capacity(b);
        let mut n_tokens = 0;
        for (col, (s_ids, t_ids)) in pairs.iter().enumerate() {
            assert!(!s_ids.is_empty(), "source must be non-empty");
            src_len.push(s_ids.len());
            for (t, &id) in s_ids.iter().enumerate() {
                src[[t, col]] = id;
            }
            tgt_in[[0, col]] = SOS;
            for (t, &id) in t_ids.iter().enumerate() {
                tgt_in[[t + 1, col]] = id;
                tgt_out[[t, col]] = id;
            }
            tgt_out[[t_ids.len(), col]] = EOS;
            n_tokens += t_ids.len() + 1;
        }
        Batch {
            src,
            src_len,
            tgt_in,
            tgt_out,
            n_tokens,
        }
    }
}

/// Per-position encoder states plus per-layer final states for decoder
/// initialization.
#[derive(Debug, Clone)]
pub struct Encoding<F: Real> {
    /// Top-layer hidden state per source position, `(T, H)`.
    pub states: Array2<F>,
    /// `(hidden, cell)` of every layer at the last position.
    pub finals: Vec<(Array1<F>, Array1<F>)>,
}

/// Gradient and loss of one forward/backward pass over a chunk, with
/// gradients of the token-summed loss (the caller normalizes).
pub struct ChunkOut<F: Real> {
    pub loss_sum: f64,
    pub tokens: usize,
    pub grads: Vec<F>,
}

pub(crate) struct LstmCache<F: Real> {
    /// Post-activation gates `(T, B, 4H)` packed `[i f g o]`.
    gates: Array3<F>,
    c: Array3<F>,
    tanh_c: Array3<F>,
    pub h: Array3<F>,
}

pub(crate) struct LstmGrads<F: Real> {
    pub dw: Array2<F>,
    pub du: Array2<F>,
    pub db: Array1<F>,
    pub dx: Array3<F>,
    pub dh0: Array2<F>,
    pub dc0: Array2<F>,
}

fn flat2<F: Real>(a: &Array3<F>) -> ArrayView2<'_, F> {
    let (t, b, d) = a.dim();
    a.view()
        .into_shape_with_order((t * b, d))
        .expect("standard layout")
}

pub(crate) fn lstm_forward<F: Real>(
    w: ArrayView2<F>,
    u: ArrayView2<F>,
    bias: ArrayView1<F>,
    x: &Array3<F>,
    h0: &Array2<F>,
    c0: &Array2<F>,
) -> LstmCache<F> {
    let (t_len, b, _) = x.dim();
    let h = u.nrows();
    let mut gates = flat2(x)
        .dot(&w)
        .into_shape_with_order((t_len, b, 4 * h))
        .expect("shape");
    let mut c = Array3::zeros((t_len, b, h));
    let mut tanh_c = Array3::zeros((t_len, b, h));
    let mut hs = Array3::zeros((t_len, b, h));
    for t in 0..t_len {
        let rec = if t == 0 {
            h0.dot(&u)
        } else {
            hs.index_axis(Axis(0), t - 1).dot(&u)
        };
        let mut a_t = gates.index_axis_mut(Axis(0), t);
        a_t += &rec;
        a_t += &bias;
        let (mut gi, mut gf, mut gg, mut go) = a_t.multi_slice_mut((
            s![.., 0..h],
            s![.., h..2 * h],
            s![.., 2 * h..3 * h],
            s![.., 3 * h..4 * h],
        ));
        gi.mapv_inplace(sigmoid);
        gf.mapv_inplace(sigmoid);
        gg.mapv_inplace(tanh);
        go.mapv_inplace(sigmoid);
        let c_prev = if t == 0 {
            c0.view()
        } else {
            c.index_axis(Axis(0), t - 1)
        };
        // Snapshot c_prev: the mutable borrow below aliases `c` otherwise.
        let c_prev = c_prev.to_owned();
        let mut c_t = c.index_axis_mut(Axis(0), t);
        Zip::from(&mut c_t)
            .and(&gf)
            .and(&c_prev)
            .and(&gi)
            .and(&gg)
            .for_each(|c, &f, &cp, &i, &g| *c = f * cp + i * g);
        let mut tc_t = tanh_c.index_axis_mut(Axis(0), t);
        Zip::from(&mut tc_t).and(&c_t).for_each(|tc, &cv| *tc = tanh(cv));
        let mut h_t = hs.index_axis_mut(Axis(0), t);
        Zip::from(&mut h_t).and(&go).and(&tc_t).for_each(|hv, &o, &tc| *hv = o * tc);
    }
    LstmCache {
        gates,
        c,
        tanh_c,
        h: hs,
    }
}

pub(crate) fn lstm_backward<F: Real>(
    w: ArrayView2<F>,
    u: ArrayView2<F>,
    x: &Array3<F>,
    h0: &Array2<F>,
    c0: &Array2<F>,
    cache: &LstmCache<F>,
    dh_out: &Array3<F>,
    dc_out: Option<&Array3<F>>,
) -> LstmGrads<F> {
    let (t_len, b, in_dim) = x.dim();
    let h = u.nrows();
    let mut da = Array3::<F>::zeros((t_len, b, 4 * h));
    let mut dh_rec = Array2::<F>::zeros((b, h));
    let mut dc_rec = Array2::<F>::zeros((b, h));
    for t in (0..t_len).rev() {
        let gates_t = cache.gates.index_axis(Axis(0), t);
        let (gi, gf, gg, go) = (
            gates_t.slice(s![.., 0..h]),
            gates_t.slice(s![.., h..2 * h]),
            gates_t.slice(s![.., 2 * h..3 * h]),
            gates_t.slice(s![.., 3 * h..4 * h]),
        );
        let tc = cache.tanh_c.index_axis(Axis(0), t);
        let c_prev = if t == 0 {
            c0.view()
        } else {
            cache.c.index_axis(Axis(0), t - 1)
        };
        // dh collects the injected gradient plus recurrence.
        let mut dh = dh_out.index_axis(Axis(0), t).to_owned();
        dh += &dh_rec;
        // dc = recurrence + tanh path + optional injection.
        let mut dc = dc_rec;
        Zip::from(&mut dc)
            .and(&dh)
            .and(&go)
            .and(&tc)
            .for_each(|dcv, &dhv, &o, &tcv| *dcv = *dcv + dhv * o * (F::one() - tcv * tcv));
        if let Some(inj) = dc_out {
            dc += &inj.index_axis(Axis(0), t);
        }
        let mut da_t = da.index_axis_mut(Axis(0), t);
        {
            let (mut dai, mut daf, mut dag, mut dao) = da_t.multi_slice_mut((
                s![.., 0..h],
                s![.., h..2 * h],
                s![.., 2 * h..3 * h],
                s![.., 3 * h..4 * h],
            ));
            Zip::from(&mut dai)
                .and(&dc)
                .and(&gg)
                .and(&gi)
                .for_each(|d, &dcv, &g, &i| *d = dcv * g * i * (F::one() - i));
            Zip::from(&mut daf)
                .and(&dc)
                .and(&c_prev)
                .and(&gf)
                .for_each(|d, &dcv, &cp, &f| *d = dcv * cp * f * (F::one() - f));
            Zip::from(&mut dag)
                .and(&dc)
                .and(&gi)
                .and(&gg)
                .for_each(|d, &dcv, &i, &g| *d = dcv * i * (F::one() - g * g));
            Zip::from(&mut dao)
                .and(&dh)
                .and(&tc)
                .and(&go)
                .for_each(|d, &dhv, &tcv, &o| *d = dhv * tcv * o * (F::one() - o));
        }
        dh_rec = da_t.dot(&u.t());
        let mut next_dc = Array2::<F>::zeros((b, h));
        Zip::from(&mut next_dc)
            .and(&dc)
            .and(&gf)
            .for_each(|n, &dcv, &f| *n = dcv * f);
        dc_rec = next_dc;
    }
    let x_flat = flat2(x);
    let da_flat = flat2(&da);
    let dw = x_flat.t().dot(&da_flat);
    // Previous hidden per step: h0 then h shifted by one.
    let mut hprev = Array3::<F>::zeros((t_len, b, h));
    hprev.index_axis_mut(Axis(0), 0).assign(h0);
    for t in 1..t_len {
        let src = cache.h.index_axis(Axis(0), t - 1).to_owned();
        hprev.index_axis_mut(Axis(0), t).assign(&src);
    }
    let du = flat2(&hprev).t().dot(&da_flat);
    let db = da_flat.sum_axis(Axis(0));
    let dx = da_flat
        .dot(&w.t())
        .into_shape_with_order((t_len, b, in_dim))
        .expect("shape");
    LstmGrads {
        dw,
        du,
        db,
        dx,
        dh0: dh_rec,
        dc0: dc_rec,
    }
}

fn embed<F: Real>(table: ArrayView2<F>, ids: &Array2<usize>) -> Array3<F> {
    let (t_len, b) = ids.dim();
    let e = table.ncols();
    let mut out = Array3::zeros((t_len, b, e));
    for t in 0..t_len {
        for col in 0..b {
            out.slice_mut(s![t, col, ..]).assign(&table.row(ids[[t, col]]));
        }
    }
    out
}

fn embed_backward<F: Real>(grad: &mut [F], e: usize, ids: &Array2<usize>, dx: &Array3<F>) {
    let (t_len, b) = ids.dim();
    for t in 0..t_len {
        for col in 0..b {
            let id = ids[[t, col]];
            let row = &mut grad[id * e..(id + 1) * e];
            for (g, &d) in row.iter_mut().zip(dx.slice(s![t, col, ..]).iter()) {
                *g = *g + d;
            }
        }
    }
}

struct SeqCaches<F: Real> {
    x0: Array3<F>,
    layers: Vec<LstmCache<F>>,
}

/// Encoder-decoder model: configuration, tensor layout, and one flat
/// parameter buffer.
#[derive(Debug, Clone)]
pub struct Model<F: Real> {
    pub config: ModelConfig,
    pub layout: ParamLayout,
    pub params: Vec<F>,
}

impl<F: Real> Model<F> {
    pub fn new_random<R: Rng + ?Sized>(
        config: ModelConfig,
        src_vocab: usize,
        tgt_vocab: usize,
        rng: &mut R,
    ) -> Model<F> {
        let layout = ParamLayout::new(&config, src_vocab, tgt_vocab);
        let params = layout.init_uniform(0.08, rng);
        Model {
            config,
            layout,
            params,
        }
    }

    fn run_layers(
        &self,
        ids: &Array2<usize>,
        embed_id: TensorId,
        lstm_w: fn(usize) -> TensorId,
        lstm_u: fn(usize) -> TensorId,
        lstm_b: fn(usize) -> TensorId,
        inits: Option<&[(Array2<F>, Array2<F>)]>,
    ) -> SeqCaches<F> {
        let b = ids.ncols();
        let h = self.layout.hidden;
        let zeros = Array2::<F>::zeros((b, h));
        let x0 = embed(self.layout.view2(&self.params, embed_id), ids);
        let mut layers: Vec<LstmCache<F>> = Vec::with_capacity(self.layout.layers);
        for l in 0..self.layout.layers {
            let (h0, c0) = match inits {
                Some(states) => (&states[l].0, &states[l].1),
                None => (&zeros, &zeros),
            };
            let input = if l == 0 {
                &x0
            } else {
                &layers[l - 1].h
            };
            let cache = lstm_forward(
                self.layout.view2(&self.params, lstm_w(l)),
                self.layout.view2(&self.params, lstm_u(l)),
                self.layout.view1(&self.params, lstm_b(l)),
                input,
                h0,
                c0,
            );
            layers.push(cache);
        }
        SeqCaches { x0, layers }
    }

    fn gather_finals(&self, enc: &SeqCaches<F>, src_len: &[usize]) -> Vec<(Array2<F>, Array2<F>)> {
        let b = src_len.len();
        let h = self.layout.hidden;
        enc.layers
            .iter()
            .map(|cache| {
                let mut hf = Array2::zeros((b, h));
                let mut cf = Array2::zeros((b, h));
                for (col, &len) in src_len.iter().enumerate() {
                    hf.row_mut(col).assign(&cache.h.slice(s![len - 1, col, ..]));
                    cf.row_mut(col).assign(&cache.c.slice(s![len - 1, col, ..]));
                }
                (hf, cf)
            })
            .collect()
    }

    /// Single-sequence encoding: per-position top-layer states plus final
    /// `(hidden, cell)` per layer. Indices must fall inside the source
    /// vocabulary.
    pub fn encode(&self, src: &[usize]) -> Result<Encoding<F>, Seq2SeqError> {
        if src.is_empty() {
            return Err(Seq2SeqError::BadConfig("empty source sequence".into()));
        }
        for &id in src {
            if id >= self.layout.src_vocab {
                return Err(Seq2SeqError::BadIndex {
                    index: id,
                    vocab_len: self.layout.src_vocab,
                });
            }
        }
        let ids = Array2::from_shape_vec((src.len(), 1), src.to_vec()).expect("shape");
        let enc = self.run_layers(
            &ids,
            TensorId::SrcEmbed,
            TensorId::EncW,
            TensorId::EncU,
            TensorId::EncB,
            None,
        );
        let top = enc.layers.last().expect("at least one layer");
        let states = top.h.index_axis(Axis(1), 0).to_owned();
        let finals = self
            .gather_finals(&enc, &[src.len()])
            .into_iter()
            .map(|(hf, cf)| (hf.row(0).to_owned(), cf.row(0).to_owned()))
            .collect();
        Ok(Encoding { states, finals })
    }

    /// Bilinear attention read: softmax over `h_dec * W_a * enc_states^T`,
    /// then the convex combination of encoder states under those weights.
    pub fn attend(
        &self,
        dec_state: ArrayView1<F>,
        enc_states: ArrayView2<F>,
    ) -> (Array1<F>, Array1<F>) {
        let wa = self.layout.view2(&self.params, TensorId::AttnScore);
        let u = dec_state.dot(&wa);
        let mut scores = enc_states.dot(&u);
        let max = scores.iter().cloned().fold(F::neg_infinity(), F::max);
        scores.mapv_inplace(|v| (v - max).exp());
        let total = scores.sum();
        scores.mapv_inplace(|v| v / total);
        let context = scores.dot(&enc_states);
        (context, scores)
    }

    /// Token-summed cross-entropy and token count, no gradients.
    pub fn forward_loss(&self, batch: &Batch) -> (f64, usize) {
        let (loss, _, _) = self.forward_full(batch, false);
        (loss, batch.n_tokens)
    }

    /// Forward and backward over one chunk; gradients are of the
    /// token-summed loss, in layout order.
    pub fn forward_backward(&self, batch: &Batch) -> ChunkOut<F> {
        let (loss_sum, grads, _) = self.forward_full(batch, true);
        ChunkOut {
            loss_sum,
            tokens: batch.n_tokens,
            grads: grads.expect("gradients requested"),
        }
    }

    fn forward_full(
        &self,
        batch: &Batch,
        want_grads: bool,
    ) -> (f64, Option<Vec<F>>, usize) {
        let layout = &self.layout;
        let h = layout.hidden;
        let b = batch.src.ncols();
        let ts = batch.src.nrows();
        let tt = batch.tgt_in.nrows();

        // Encoder.
        let enc = self.run_layers(
            &batch.src,
            TensorId::SrcEmbed,
            TensorId::EncW,
            TensorId::EncU,
            TensorId::EncB,
            None,
        );
        let hbar = &enc.layers.last().expect("layers").h; // (Ts, B, H)
        let finals = self.gather_finals(&enc, &batch.src_len);

        // Decoder.
        let dec = self.run_layers(
            &batch.tgt_in,
            TensorId::TgtEmbed,
            TensorId::DecW,
            TensorId::DecU,
            TensorId::DecB,
            Some(&finals),
        );
        let hdec = &dec.layers.last().expect("layers").h; // (Tt, B, H)

        // Attention, batched over decoder steps.
        let wa = layout.view2(&self.params, TensorId::AttnScore);
        let u = flat2(hdec)
            .dot(&wa)
            .into_shape_with_order((tt, b, h))
            .expect("shape");
        let mut alpha = Array3::<F>::zeros((b, tt, ts));
        let mut ctx = Array3::<F>::zeros((tt, b, h));
        let masked = F::from_f64(MASKED_SCORE);
        for col in 0..b {
            let u_b = u.index_axis(Axis(1), col);
            let hbar_b = hbar.index_axis(Axis(1), col);
            let mut e_b = u_b.dot(&hbar_b.t()); // (Tt, Ts)
            let len = batch.src_len[col];
            if len < ts {
                e_b.slice_mut(s![.., len..]).fill(masked);
            }
            for mut row in e_b.rows_mut() {
                let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
                row.mapv_inplace(|v| (v - max).exp());
                let total = row.sum();
                row.mapv_inplace(|v| v / total);
            }
            alpha.index_axis_mut(Axis(0), col).assign(&e_b);
            let ctx_b = e_b.dot(&hbar_b); // (Tt, H)
            ctx.index_axis_mut(Axis(1), col).assign(&ctx_b);
        }

        // Attentional state and output distribution.
        let mut hcat = Array3::<F>::zeros((tt, b, 2 * h));
        hcat.slice_mut(s![.., .., 0..h]).assign(&ctx);
        hcat.slice_mut(s![.., .., h..2 * h]).assign(hdec);
        let wc = layout.view2(&self.params, TensorId::AttnCombine);
        let mut htilde = flat2(&hcat).dot(&wc); // (Tt*B, H)
        htilde.mapv_inplace(tanh);
        let wo = layout.view2(&self.params, TensorId::OutProj);
        let bo = layout.view1(&self.params, TensorId::OutBias);
        let mut probs = htilde.dot(&wo); // (Tt*B, Vt), logits for now
        probs += &bo;

        // Masked cross-entropy; rows convert to softmax in place.
        let mut loss_sum = 0.0f64;
        for t in 0..tt {
            for col in 0..b {
                let target = batch.tgt_out[[t, col]];
                let mut row = probs.row_mut(t * b + col);
                if target == PAD {
                    row.fill(F::zero());
                    continue;
                }
                let logit_target = row[target].to_f64();
                let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
                let mut total = F::zero();
                row.mapv_inplace(|v| {
                    let ev = (v - max).exp();
                    total = total + ev;
                    ev
                });
                let lse = max.to_f64() + total.to_f64().ln();
                loss_sum += lse - logit_target;
                row.mapv_inplace(|v| v / total);
            }
        }

        if !want_grads {
            return (loss_sum, None, batch.n_tokens);
        }

        let mut grads = layout.zeros::<F>();

        // d logits = probs - onehot on scored rows (probs already zeroed on
        // padded rows).
        for t in 0..tt {
            for col in 0..b {
                let target = batch.tgt_out[[t, col]];
                if target == PAD {
                    continue;
                }
                let idx = t * b + col;
                probs[[idx, target]] = probs[[idx, target]] - F::one();
            }
        }
        let dlogits = probs;

        // Output projection.
        {
            let dwo = htilde.t().dot(&dlogits);
            let dbo = dlogits.sum_axis(Axis(0));
            add_into(layout.slice_mut(&mut grads, TensorId::OutProj), &dwo);
            add_into1(layout.slice_mut(&mut grads, TensorId::OutBias), &dbo);
        }
        let dhtilde = dlogits.dot(&wo.t()); // (Tt*B, H)

        // Attentional combine.
        let mut dhpre = dhtilde;
        Zip::from(&mut dhpre)
            .and(&htilde)
            .for_each(|d, &hv| *d = *d * (F::one() - hv * hv));
        {
            let dwc = flat2(&hcat).t().dot(&dhpre);
            add_into(layout.slice_mut(&mut grads, TensorId::AttnCombine), &dwc);
        }
        let dcat = dhpre
            .dot(&wc.t())
            .into_shape_with_order((tt, b, 2 * h))
            .expect("shape");
        let dctx = dcat.slice(s![.., .., 0..h]).to_owned();
        let mut dhdec = dcat.slice(s![.., .., h..2 * h]).to_owned();

        // Attention backward.
        let mut dhbar = Array3::<F>::zeros((ts, b, h));
        let mut du = Array3::<F>::zeros((tt, b, h));
        for col in 0..b {
            let hbar_b = hbar.index_axis(Axis(1), col); // (Ts, H)
            let alpha_b = alpha.index_axis(Axis(0), col); // (Tt, Ts)
            let dctx_b = dctx.index_axis(Axis(1), col); // (Tt, H)
            let dalpha = dctx_b.dot(&hbar_b.t()); // (Tt, Ts)
            let mut dhbar_b = alpha_b.t().dot(&dctx_b); // (Ts, H)
            // Softmax rows backward.
            let mut de = Array2::<F>::zeros((tt, ts));
            for t in 0..tt {
                let a_row = alpha_b.row(t);
                let da_row = dalpha.row(t);
                let dot = a_row
                    .iter()
                    .zip(da_row.iter())
                    .fold(F::zero(), |acc, (&a, &d)| acc + a * d);
                let mut de_row = de.row_mut(t);
                Zip::from(&mut de_row)
                    .and(&a_row)
                    .and(&da_row)
                    .for_each(|e, &a, &d| *e = a * (d - dot));
            }
            let du_b = de.dot(&hbar_b); // (Tt, H)
            dhbar_b += &de.t().dot(&u.index_axis(Axis(1), col));
            du.index_axis_mut(Axis(1), col).assign(&du_b);
            dhbar.index_axis_mut(Axis(1), col).assign(&dhbar_b);
        }
        {
            let dwa = flat2(hdec).t().dot(&flat2(&du));
            add_into(layout.slice_mut(&mut grads, TensorId::AttnScore), &dwa);
        }
        let du_flat = flat2(&du);
        let add_dhdec = du_flat
            .dot(&wa.t())
            .into_shape_with_order((tt, b, h))
            .expect("shape");
        dhdec += &add_dhdec;

        // Decoder BPTT, collecting init gradients per layer.
        let zeros_init = Array2::<F>::zeros((b, h));
        let mut dec_init_grads: Vec<(Array2<F>, Array2<F>)> = Vec::with_capacity(layout.layers);
        let mut dh_l = dhdec;
        for l in (0..layout.layers).rev() {
            let input = if l == 0 { &dec.x0 } else { &dec.layers[l - 1].h };
            let g = lstm_backward(
                layout.view2(&self.params, TensorId::DecW(l)),
                layout.view2(&self.params, TensorId::DecU(l)),
                input,
                &finals[l].0,
                &finals[l].1,
                &dec.layers[l],
                &dh_l,
                None,
            );
            add_into(layout.slice_mut(&mut grads, TensorId::DecW(l)), &g.dw);
            add_into(layout.slice_mut(&mut grads, TensorId::DecU(l)), &g.du);
            add_into1(layout.slice_mut(&mut grads, TensorId::DecB(l)), &g.db);
            dec_init_grads.push((g.dh0, g.dc0));
            if l == 0 {
                embed_backward(
                    layout.slice_mut(&mut grads, TensorId::TgtEmbed),
                    layout.embedding,
                    &batch.tgt_in,
                    &g.dx,
                );
            }
            dh_l = g.dx;
        }
        dec_init_grads.reverse();

        // Encoder BPTT: the top layer sees attention gradients; every layer
        // additionally receives its final-state gradient from the decoder
        // initialization, injected at each sequence's last position.
        let mut dh_l = dhbar;
        for l in (0..layout.layers).rev() {
            let (dh0_dec, dc0_dec) = &dec_init_grads[l];
            let mut dc_inj = Array3::<F>::zeros((ts, b, h));
            for (col, &len) in batch.src_len.iter().enumerate() {
                let mut slot = dh_l.slice_mut(s![len - 1, col, ..]);
                slot += &dh0_dec.row(col);
                dc_inj
                    .slice_mut(s![len - 1, col, ..])
                    .assign(&dc0_dec.row(col));
            }
            let input = if l == 0 { &enc.x0 } else { &enc.layers[l - 1].h };
            let g = lstm_backward(
                layout.view2(&self.params, TensorId::EncW(l)),
                layout.view2(&self.params, TensorId::EncU(l)),
                input,
                &zeros_init,
                &zeros_init,
                &enc.layers[l],
                &dh_l,
                Some(&dc_inj),
            );
            add_into(layout.slice_mut(&mut grads, TensorId::EncW(l)), &g.dw);
            add_into(layout.slice_mut(&mut grads, TensorId::EncU(l)), &g.du);
            add_into1(layout.slice_mut(&mut grads, TensorId::EncB(l)), &g.db);
            if l == 0 {
                embed_backward(
                    layout.slice_mut(&mut grads, TensorId::SrcEmbed),
                    layout.embedding,
                    &batch.src,
                    &g.dx,
                );
            }
            dh_l = g.dx;
        }

        (loss_sum, Some(grads), batch.n_tokens)
    }
}

fn add_into<F: Real>(dst: &mut [F], src: &Array2<F>) {
    let s = src.as_slice().expect("standard layout");
    debug_assert_eq!(dst.len(), s.len());
    for (d, &v) in dst.iter_mut().zip(s.iter()) {
        *d = *d + v;
    }
}

fn add_into1<F: Real>(dst: &mut [F], src: &Array1<F>) {
    let s = src.as_slice().expect("standard layout");
    debug_assert_eq!(dst.len(), s.len());
    for (d, &v) in dst.iter_mut().zip(s.iter()) {
        *d = *d + v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq2seq::vocab::{EOS, SOS};
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model_with(hidden: usize, layers: usize, emb: usize, seed: u64) -> Model<f64> {
        let cfg = ModelConfig {
            hidden_size: hidden,
            num_layers: layers,
            embedding_size: emb,
            seed,
            ..ModelConfig::desk_scale()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Model::new_random(cfg, 12, 10, &mut rng)
    }

    #[test]
    fn zero_parameters_encode_to_zero_states() {
        let mut m = model_with(5, 2, 4, 1);
        m.params.iter_mut().for_each(|p| *p = 0.0);
        let enc = m.encode(&[4, 5, 6]).unwrap();
        assert!(enc.states.iter().all(|&v| v == 0.0));
        for (h, c) in &enc.finals {
            assert!(h.iter().all(|&v| v == 0.0));
            assert!(c.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn encode_output_shape_is_len_by_hidden() {
        let m = model_with(7, 2, 4, 2);
        let enc = m.encode(&[4, 5, 6, 7, 8]).unwrap();
        assert_eq!(enc.states.shape(), &[5, 7]);
        assert_eq!(enc.finals.len(), 2);
        assert_eq!(enc.finals[0].0.len(), 7);
    }

    #[test]
    fn encode_rejects_out_of_vocabulary_indices() {
        let m = model_with(5, 1, 4, 3);
        assert!(matches!(
            m.encode(&[4, 12]),
            Err(Seq2SeqError::BadIndex { index: 12, vocab_len: 12 })
        ));
    }

    #[test]
    fn single_lstm_step_matches_hand_computed_gates() {
        // One layer, hidden 2, embedding 2, one token: every gate is worked
        // out longhand with scalar arithmetic.
        let cfg = ModelConfig {
            hidden_size: 2,
            num_layers: 1,
            embedding_size: 2,
            ..ModelConfig::desk_scale()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m: Model<f64> = Model::new_random(cfg, 5, 5, &mut rng);
        m.params.iter_mut().for_each(|p| *p = 0.0);
        // Embedding of token 4 = [0.5, -1.0].
        {
            let mut emb = m.layout.view2_mut(&mut m.params, TensorId::SrcEmbed);
            emb[[4, 0]] = 0.5;
            emb[[4, 1]] = -1.0;
        }
        // W maps [x0, x1] to gates [i0 i1 f0 f1 g0 g1 o0 o1].
        let w_vals = [
            [0.1, -0.2, 0.3, 0.0, 0.5, 0.7, -0.4, 0.2],
            [0.6, 0.1, -0.3, 0.2, 0.0, -0.5, 0.8, -0.1],
        ];
        {
            let mut w = m.layout.view2_mut(&mut m.params, TensorId::EncW(0));
            for (r, row) in w_vals.iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    w[[r, c]] = v;
                }
            }
        }
        {
            let mut b = m.layout.view2_mut(&mut m.params, TensorId::EncU(0));
            b.fill(0.0); // recurrent term drops out at t = 0 anyway
        }
        let bias = [0.05, -0.05, 0.1, 0.2, -0.1, 0.0, 0.3, jitter()];
        {
            let slice = m.layout.slice_mut(&mut m.params, TensorId::EncB(0));
            slice.copy_from_slice(&bias);
        }
        let enc = m.encode(&[4]).unwrap();

        // Longhand: a = x.W + b with x = [0.5, -1.0].
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let th = |v: f64| v.tanh();
        let x = [0.5, -1.0];
        let mut a = [0.0f64; 8];
        for g in 0..8 {
            a[g] = x[0] * w_vals[0][g] + x[1] * w_vals[1][g] + bias[g];
        }
        let (i0, i1) = (sig(a[0]), sig(a[1]));
        let (f0, f1) = (sig(a[2]), sig(a[3]));
        let (g0, g1) = (th(a[4]), th(a[5]));
        let (o0, o1) = (sig(a[6]), sig(a[7]));
        let _ = (f0, f1); // cell starts at zero, forget path contributes nothing
        let c = [i0 * g0, i1 * g1];
        let expect_h = [o0 * th(c[0]), o1 * th(c[1])];
        for k in 0..2 {
            assert!(
                (enc.states[[0, k]] - expect_h[k]).abs() < 1e-12,
                "h[{k}] = {} vs {}",
                enc.states[[0, k]],
                expect_h[k]
            );
            assert!((enc.finals[0].1[k] - c[k]).abs() < 1e-12);
        }
    }

    fn jitter() -> f64 {
        -0.15
    }

    #[test]
    fn attention_over_identical_states_is_uniform() {
        let m = model_with(6, 1, 4, 4);
        let dec = Array1::from_elem(6, 0.3);
        let states = Array2::from_elem((5, 6), 0.7);
        let (ctx, weights) = m.attend(dec.view(), states.view());
        for &w in weights.iter() {
            assert!((w - 0.2).abs() < 1e-6);
        }
        assert!((weights.sum() - 1.0).abs() < 1e-6);
        for &c in ctx.iter() {
            assert!((c - 0.7).abs() < 1e-9, "context is the convex combination");
        }
    }

    #[test]
    fn attention_saturates_on_a_dominating_score() {
        let mut m = model_with(2, 1, 2, 5);
        // Identity score matrix makes scores plain dot products.
        {
            let mut wa = m.layout.view2_mut(&mut m.params, TensorId::AttnScore);
            wa.fill(0.0);
            wa[[0, 0]] = 1.0;
            wa[[1, 1]] = 1.0;
        }
        let dec = Array1::from_vec(vec![10.0, 0.0]);
        let states = Array2::from_shape_vec((2, 2), vec![10.0, 0.0, 0.0, 10.0]).unwrap();
        let (_, weights) = m.attend(dec.view(), states.view());
        assert!((weights[0] - 1.0).abs() < 1e-8);
        assert!(weights[1] < 1e-8);
    }

    #[test]
    fn attention_weights_sum_to_one_for_random_inputs() {
        let m = model_with(8, 1, 4, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let dec = Array1::from_shape_fn(8, |_| rng.random::<f64>() * 4.0 - 2.0);
            let states = Array2::from_shape_fn((7, 8), |_| rng.random::<f64>() * 4.0 - 2.0);
            let (ctx, weights) = m.attend(dec.view(), states.view());
            assert!((weights.sum() - 1.0).abs() < 1e-6);
            assert!(weights.iter().all(|&w| w >= 0.0));
            assert_eq!(ctx.len(), 8);
        }
    }

    #[test]
    fn batch_layout_places_markers_correctly() {
        let src_a = vec![4usize, 5, 6];
        let src_b = vec![7usize];
        let tgt_a = vec![4usize, 5];
        let tgt_b = vec![6usize, 7, 8];
        let batch = Batch::new(&[(&src_a, &tgt_a), (&src_b, &tgt_b)]);
        assert_eq!(batch.src.shape(), &[3, 2]);
        assert_eq!(batch.src[[0, 1]], 7);
        assert_eq!(batch.src[[1, 1]], PAD);
        assert_eq!(batch.src_len, vec![3, 1]);
        assert_eq!(batch.tgt_in[[0, 0]], SOS);
        assert_eq!(batch.tgt_in[[1, 0]], 4);
        assert_eq!(batch.tgt_out[[2, 0]], EOS);
        assert_eq!(batch.tgt_out[[3, 0]], PAD);
        assert_eq!(batch.tgt_out[[3, 1]], EOS);
        assert_eq!(batch.n_tokens, 3 + 4);
    }
}
