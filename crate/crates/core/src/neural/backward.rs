use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::linalg::Matrix;
use crate::neural::forward::{ForwardCache, LaneCache};
use crate::neural::params::{Direction, LstmParams, SequenceClassifier};
use crate::text::PAD_ID;
use std::collections::BTreeMap;

/// Gradients for one lane, mirroring [`LstmParams`] shapes.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub b_f: Matrix,
    pub b_i: Matrix,
    pub b_c: Matrix,
    pub b_o: Matrix,
}

impl LstmGrads {
    fn zeros(hidden: usize, embed: usize) -> LstmGrads {
        LstmGrads {
            w_f: Matrix::zeros(hidden, hidden + embed),
            w_i: Matrix::zeros(hidden, hidden + embed),
            w_c: Matrix::zeros(hidden, hidden + embed),
            w_o: Matrix::zeros(hidden, hidden + embed),
            b_f: Matrix::zeros(hidden, 1),
            b_i: Matrix::zeros(hidden, 1),
            b_c: Matrix::zeros(hidden, 1),
            b_o: Matrix::zeros(hidden, 1),
        }
    }

    fn merge(&mut self, other: &LstmGrads) {
        self.w_f.add_scaled(&other.w_f, 1.0).unwrap();
        self.w_i.add_scaled(&other.w_i, 1.0).unwrap();
        self.w_c.add_scaled(&other.w_c, 1.0).unwrap();
        self.w_o.add_scaled(&other.w_o, 1.0).unwrap();
        self.b_f.add_scaled(&other.b_f, 1.0).unwrap();
        self.b_i.add_scaled(&other.b_i, 1.0).unwrap();
        self.b_c.add_scaled(&other.b_c, 1.0).unwrap();
        self.b_o.add_scaled(&other.b_o, 1.0).unwrap();
    }
}

/// Batch gradients of the regularized loss with respect to every trainable
/// tensor. Embedding gradients are dense; the pad row is always zero.
#[derive(Debug, Clone)]
pub struct BatchGrads {
    pub embedding: Matrix,
    pub forward: LstmGrads,
    pub backward: Option<LstmGrads>,
    pub head_w: Matrix,
    pub head_b: f64,
}

/// Sparse per-chunk accumulator: embedding rows are recorded only when
/// touched, keyed by token id so merge order is deterministic.
struct GradAcc {
    emb: BTreeMap<u32, Vec<f64>>,
    fwd: LstmGrads,
    bwd: Option<LstmGrads>,
    head_w: Matrix,
    head_b: f64,
}

impl GradAcc {
    fn zeros(model: &SequenceClassifier) -> GradAcc {
        let (h, e) = (model.dims.hidden, model.dims.embed);
        GradAcc {
            emb: BTreeMap::new(),
            fwd: LstmGrads::zeros(h, e),
            bwd: match model.direction {
                Direction::Forward => None,
                Direction::Bidirectional => Some(LstmGrads::zeros(h, e)),
            },
            head_w: Matrix::zeros(1, model.h_out()),
            head_b: 0.0,
        }
    }

    fn merge(&mut self, other: GradAcc) {
        for (token, row) in other.emb {
            let dst = self
                .emb
                .entry(token)
                .or_insert_with(|| vec![0.0; row.len()]);
            for (d, s) in dst.iter_mut().zip(&row) {
                *d += s;
            }
        }
        self.fwd.merge(&other.fwd);
        if let (Some(a), Some(b)) = (self.bwd.as_mut(), other.bwd.as_ref()) {
            a.merge(b);
        }
        self.head_w.add_scaled(&other.head_w, 1.0).unwrap();
        self.head_b += other.head_b;
    }
}

/// Backpropagation through time for one lane. `d_final` is the loss
/// gradient on the lane's final hidden state; parameter gradients accumulate
/// into `grads` and embedding-row gradients into `emb`.
fn lane_backward(
    params: &LstmParams,
    cache: &LaneCache,
    d_final: &Matrix,
    grads: &mut LstmGrads,
    emb: &mut BTreeMap<u32, Vec<f64>>,
    hidden: usize,
) -> Result<()> {
    let mut dh_next = d_final.clone();
    let mut dc_next = Matrix::zeros(hidden, 1);

    for step in cache.steps.iter().rev() {
        if step.skipped {
            continue;
        }
        let s = &step.state;
        let tanh_c = s.c.map(crate::linalg::tanh_scalar);

        // h = o ⊙ tanh(c):
        let dh = dh_next;
        let do_raw = {
            let mut d = dh.hadamard(&tanh_c)?;
            for (v, o) in d.data_mut().iter_mut().zip(s.o.data()) {
                *v *= o * (1.0 - o);
            }
            d
        };
        // dc collects the output path plus the carry from the later step.
        let mut dc = dh.hadamard(&s.o)?;
        for (v, t) in dc.data_mut().iter_mut().zip(tanh_c.data()) {
            *v *= 1.0 - t * t;
        }
        dc.add_scaled(&dc_next, 1.0)?;

        // c = f ⊙ c_prev + i ⊙ c_tilde:
        let df_raw = {
            let mut d = dc.hadamard(&step.c_prev)?;
            for (v, f) in d.data_mut().iter_mut().zip(s.f.data()) {
                *v *= f * (1.0 - f);
            }
            d
        };
        let di_raw = {
            let mut d = dc.hadamard(&s.c_tilde)?;
            for (v, i) in d.data_mut().iter_mut().zip(s.i.data()) {
                *v *= i * (1.0 - i);
            }
            d
        };
        let dct_raw = {
            let mut d = dc.hadamard(&s.i)?;
            for (v, ct) in d.data_mut().iter_mut().zip(s.c_tilde.data()) {
                *v *= 1.0 - ct * ct;
            }
            d
        };

        grads.w_f.add_outer(&df_raw, &step.z, 1.0)?;
        grads.w_i.add_outer(&di_raw, &step.z, 1.0)?;
        grads.w_c.add_outer(&dct_raw, &step.z, 1.0)?;
        grads.w_o.add_outer(&do_raw, &step.z, 1.0)?;
        grads.b_f.add_scaled(&df_raw, 1.0)?;
        grads.b_i.add_scaled(&di_raw, 1.0)?;
        grads.b_c.add_scaled(&dct_raw, 1.0)?;
        grads.b_o.add_scaled(&do_raw, 1.0)?;

        // dz = W_f' df + W_i' di + W_c' dct + W_o' do, then split into the
        // hidden part (flows to the previous step) and the input part
        // (flows to the embedding row).
        let mut dz = params.w_f.matmul_tn(&df_raw)?;
        dz.add_scaled(&params.w_i.matmul_tn(&di_raw)?, 1.0)?;
        dz.add_scaled(&params.w_c.matmul_tn(&dct_raw)?, 1.0)?;
        dz.add_scaled(&params.w_o.matmul_tn(&do_raw)?, 1.0)?;

        dh_next = Matrix::column(&dz.data()[..hidden]);
        if step.token != PAD_ID {
            let dx = &dz.data()[hidden..];
            let row = emb
                .entry(step.token)
                .or_insert_with(|| vec![0.0; dx.len()]);
            for (r, d) in row.iter_mut().zip(dx) {
                *r += d;
            }
        }
        dc_next = dc.hadamard(&s.f)?;
    }
    Ok(())
}

/// Gradient of one example's contribution to the mean data loss, scaled by
/// `1 / batch_size`, accumulated into `acc`.
fn example_backward(
    model: &SequenceClassifier,
    cache: &ForwardCache,
    label: u8,
    scale: f64,
    acc: &mut GradAcc,
) -> Result<()> {
    // d loss / d logit for binary cross-entropy through a sigmoid.
    let dlogit = scale * (cache.prob - f64::from(label));

    acc.head_w.add_outer(
        &Matrix::from_vec(1, 1, vec![dlogit])?,
        &cache.dropped,
        1.0,
    )?;
    acc.head_b += dlogit;

    let mut d_feat = model.head_w.transpose().scale(dlogit);
    if let Some(mask) = &cache.dropout_mask {
        for (v, m) in d_feat.data_mut().iter_mut().zip(mask) {
            *v *= m;
        }
    }

    let hidden = model.dims.hidden;
    match model.direction {
        Direction::Forward => {
            lane_backward(&model.forward, &cache.fwd, &d_feat, &mut acc.fwd, &mut acc.emb, hidden)
        }
        Direction::Bidirectional => {
            let d_fwd = Matrix::column(&d_feat.data()[..hidden]);
            let d_bwd = Matrix::column(&d_feat.data()[hidden..]);
            lane_backward(&model.forward, &cache.fwd, &d_fwd, &mut acc.fwd, &mut acc.emb, hidden)?;
            let bwd_params = model.backward.as_ref().expect("bidirectional lane");
            let bwd_cache = cache.bwd.as_ref().ok_or_else(|| {
                Error::usage("backward lane cache missing from forward pass")
            })?;
            lane_backward(
                bwd_params,
                bwd_cache,
                &d_bwd,
                acc.bwd.as_mut().expect("bidirectional grads"),
                &mut acc.emb,
                hidden,
            )
        }
    }
}

/// Analytic gradients of [`bce_l2_loss`](crate::neural::bce_l2_loss) over a
/// batch: mean data term plus `lambda * w` on every weight (biases and the
/// pad embedding row excluded). Examples are reduced chunk by chunk in a
/// fixed order, so sequential and parallel execution agree bitwise.
pub fn backward(
    model: &SequenceClassifier,
    caches: &[ForwardCache],
    labels: &[u8],
    lambda: f64,
    mode: Mode,
) -> Result<BatchGrads> {
    if caches.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} forward caches vs {} labels",
            caches.len(),
            labels.len()
        )));
    }
    if caches.is_empty() {
        return Err(Error::usage("backward over an empty batch"));
    }
    let scale = 1.0 / caches.len() as f64;
    let pairs: Vec<(usize, u8)> = labels.iter().copied().enumerate().collect();

    let acc = exec::chunked_fold(
        mode,
        &pairs,
        || Ok(GradAcc::zeros(model)),
        |acc: &mut Result<GradAcc>, &(idx, label)| {
            if let Ok(a) = acc.as_mut() {
                if let Err(e) = example_backward(model, &caches[idx], label, scale, a) {
                    *acc = Err(e);
                }
            }
        },
        |total: &mut Result<GradAcc>, chunk| {
            if total.is_err() {
                return;
            }
            match chunk {
                Ok(c) => {
                    if let Ok(t) = total.as_mut() {
                        t.merge(c);
                    }
                }
                Err(e) => *total = Err(e),
            }
        },
    )?;

    finalize(model, acc, lambda)
}

/// Forward and backward over one mini-batch without keeping more than one
/// live cache per worker. Numerically identical to `forward_batch` followed
/// by [`backward`] (same per-example math, same chunked reduction order),
/// but memory stays bounded for long sequences. Returns the gradients and
/// the training-time probabilities in batch order.
pub(crate) fn fused_step(
    model: &SequenceClassifier,
    seqs: &[&crate::text::EncodedSequence],
    masks: Option<&[Vec<f64>]>,
    labels: &[u8],
    lambda: f64,
    mode: Mode,
) -> Result<(BatchGrads, Vec<f64>)> {
    if seqs.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} sequences vs {} labels",
            seqs.len(),
            labels.len()
        )));
    }
    if seqs.is_empty() {
        return Err(Error::usage("training step over an empty batch"));
    }
    let scale = 1.0 / seqs.len() as f64;
    let indices: Vec<usize> = (0..seqs.len()).collect();

    struct Acc {
        grads: GradAcc,
        probs: Vec<(usize, f64)>,
    }
    let acc = exec::chunked_fold(
        mode,
        &indices,
        || {
            Ok(Acc {
                grads: GradAcc::zeros(model),
                probs: Vec::new(),
            })
        },
        |acc: &mut Result<Acc>, &idx| {
            let Ok(a) = acc.as_mut() else { return };
            let step = crate::neural::forward::forward_one(
                model,
                seqs[idx],
                masks.map(|m| m[idx].as_slice()),
            )
            .and_then(|cache| {
                a.probs.push((idx, cache.prob));
                example_backward(model, &cache, labels[idx], scale, &mut a.grads)
            });
            if let Err(e) = step {
                *acc = Err(e);
            }
        },
        |total: &mut Result<Acc>, chunk| {
            if total.is_err() {
                return;
            }
            match chunk {
                Ok(c) => {
                    if let Ok(t) = total.as_mut() {
                        t.grads.merge(c.grads);
                        t.probs.extend(c.probs);
                    }
                }
                Err(e) => *total = Err(e),
            }
        },
    )?;

    let probs: Vec<f64> = acc.probs.iter().map(|&(_, p)| p).collect();
    debug_assert!(acc.probs.windows(2).all(|w| w[0].0 < w[1].0));
    let grads = finalize(model, acc.grads, lambda)?;
    Ok((grads, probs))
}

/// Densifies the embedding gradient and applies the L2 term to the weight
/// tensors. Biases and the pad row stay untouched.
fn finalize(model: &SequenceClassifier, acc: GradAcc, lambda: f64) -> Result<BatchGrads> {
    let mut embedding = Matrix::zeros(model.dims.vocab, model.dims.embed);
    for (token, row) in &acc.emb {
        let dst = embedding.row_mut(*token as usize);
        for (d, s) in dst.iter_mut().zip(row) {
            *d += s;
        }
    }
    if lambda > 0.0 {
        for r in 1..model.dims.vocab {
            let src = model.embedding.row(r);
            let dst = embedding.row_mut(r);
            for (d, w) in dst.iter_mut().zip(src) {
                *d += lambda * w;
            }
        }
    }
    embedding.row_mut(0).fill(0.0);

    let mut fwd = acc.fwd;
    let mut bwd = acc.bwd;
    if lambda > 0.0 {
        let l2 = |g: &mut LstmGrads, p: &LstmParams| {
            g.w_f.add_scaled(&p.w_f, lambda).unwrap();
            g.w_i.add_scaled(&p.w_i, lambda).unwrap();
            g.w_c.add_scaled(&p.w_c, lambda).unwrap();
            g.w_o.add_scaled(&p.w_o, lambda).unwrap();
        };
        l2(&mut fwd, &model.forward);
        if let (Some(g), Some(p)) = (bwd.as_mut(), model.backward.as_ref()) {
            l2(g, p);
        }
    }
    let mut head_w = acc.head_w;
    if lambda > 0.0 {
        head_w.add_scaled(&model.head_w, lambda)?;
    }

    Ok(BatchGrads {
        embedding,
        forward: fwd,
        backward: bwd,
        head_w,
        head_b: acc.head_b,
    })
}
