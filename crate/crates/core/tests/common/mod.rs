//! Shared helpers for integration tests: parameter enumeration over a
//! classifier and central finite-difference gradients, written against the
//! public API only so they stay independent of the backward-pass internals.

#![allow(dead_code)]

use seqgate::exec::Mode;
use seqgate::linalg::Rng;
use seqgate::neural::{
    backward, bce_l2_loss, forward_batch, BatchGrads, Direction, ModelDims, SequenceClassifier,
};
use seqgate::text::EncodedSequence;

pub const TENSORS: [&str; 12] = [
    "embedding",
    "fwd_w_f",
    "fwd_w_i",
    "fwd_w_c",
    "fwd_w_o",
    "fwd_b_f",
    "fwd_b_i",
    "fwd_b_c",
    "fwd_b_o",
    "head_w",
    "head_b",
    "bwd", // expands to the eight backward-lane tensors
];

pub fn tensor_names(model: &SequenceClassifier) -> Vec<String> {
    let mut names: Vec<String> = [
        "embedding", "fwd_w_f", "fwd_w_i", "fwd_w_c", "fwd_w_o", "fwd_b_f", "fwd_b_i", "fwd_b_c",
        "fwd_b_o",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    if model.backward.is_some() {
        for g in ["w_f", "w_i", "w_c", "w_o", "b_f", "b_i", "b_c", "b_o"] {
            names.push(format!("bwd_{g}"));
        }
    }
    names.push("head_w".to_string());
    names.push("head_b".to_string());
    names
}

pub fn tensor_mut<'a>(model: &'a mut SequenceClassifier, name: &str) -> &'a mut [f64] {
    match name {
        "embedding" => model.embedding.data_mut(),
        "fwd_w_f" => model.forward.w_f.data_mut(),
        "fwd_w_i" => model.forward.w_i.data_mut(),
        "fwd_w_c" => model.forward.w_c.data_mut(),
        "fwd_w_o" => model.forward.w_o.data_mut(),
        "fwd_b_f" => model.forward.b_f.data_mut(),
        "fwd_b_i" => model.forward.b_i.data_mut(),
        "fwd_b_c" => model.forward.b_c.data_mut(),
        "fwd_b_o" => model.forward.b_o.data_mut(),
        "bwd_w_f" => model.backward.as_mut().unwrap().w_f.data_mut(),
        "bwd_w_i" => model.backward.as_mut().unwrap().w_i.data_mut(),
        "bwd_w_c" => model.backward.as_mut().unwrap().w_c.data_mut(),
        "bwd_w_o" => model.backward.as_mut().unwrap().w_o.data_mut(),
        "bwd_b_f" => model.backward.as_mut().unwrap().b_f.data_mut(),
        "bwd_b_i" => model.backward.as_mut().unwrap().b_i.data_mut(),
        "bwd_b_c" => model.backward.as_mut().unwrap().b_c.data_mut(),
        "bwd_b_o" => model.backward.as_mut().unwrap().b_o.data_mut(),
        "head_w" => model.head_w.data_mut(),
        "head_b" => std::slice::from_mut(&mut model.head_b),
        other => panic!("unknown tensor {other}"),
    }
}

pub fn tensor_grad<'a>(grads: &'a BatchGrads, name: &str) -> &'a [f64] {
    match name {
        "embedding" => grads.embedding.data(),
        "fwd_w_f" => grads.forward.w_f.data(),
        "fwd_w_i" => grads.forward.w_i.data(),
        "fwd_w_c" => grads.forward.w_c.data(),
        "fwd_w_o" => grads.forward.w_o.data(),
        "fwd_b_f" => grads.forward.b_f.data(),
        "fwd_b_i" => grads.forward.b_i.data(),
        "fwd_b_c" => grads.forward.b_c.data(),
        "fwd_b_o" => grads.forward.b_o.data(),
        "bwd_w_f" => grads.backward.as_ref().unwrap().w_f.data(),
        "bwd_w_i" => grads.backward.as_ref().unwrap().w_i.data(),
        "bwd_w_c" => grads.backward.as_ref().unwrap().w_c.data(),
        "bwd_w_o" => grads.backward.as_ref().unwrap().w_o.data(),
        "bwd_b_f" => grads.backward.as_ref().unwrap().b_f.data(),
        "bwd_b_i" => grads.backward.as_ref().unwrap().b_i.data(),
        "bwd_b_c" => grads.backward.as_ref().unwrap().b_c.data(),
        "bwd_b_o" => grads.backward.as_ref().unwrap().b_o.data(),
        "head_w" => grads.head_w.data(),
        "head_b" => std::slice::from_ref(&grads.head_b),
        other => panic!("unknown tensor {other}"),
    }
}

/// Loss of the model on a fixed batch with fixed dropout masks; the pure
/// function finite differences are taken over.
pub fn batch_loss(
    model: &SequenceClassifier,
    seqs: &[EncodedSequence],
    labels: &[u8],
    masks: Option<&[Vec<f64>]>,
    lambda: f64,
) -> f64 {
    let caches = forward_batch(model, seqs, masks, Mode::Sequential).unwrap();
    let probs: Vec<f64> = caches.iter().map(|c| c.prob).collect();
    bce_l2_loss(&probs, labels, model, lambda).unwrap()
}

pub struct GradCheckReport {
    pub checked: usize,
    pub worst_rel: f64,
    pub worst_at: String,
}

/// Compares every trainable parameter's analytic gradient against a central
/// finite difference of the loss (step `h`). The pad embedding row is
/// pinned, not trainable, and is excluded. Panics on the first violation.
pub fn gradient_check(
    model: &mut SequenceClassifier,
    seqs: &[EncodedSequence],
    labels: &[u8],
    masks: Option<&[Vec<f64>]>,
    lambda: f64,
    h: f64,
    tol: f64,
) -> GradCheckReport {
    let caches = forward_batch(model, seqs, masks, Mode::Sequential).unwrap();
    let analytic = backward(model, &caches, labels, lambda, Mode::Sequential).unwrap();

    let embed = model.dims.embed;
    let mut checked = 0usize;
    let mut worst_rel = 0.0f64;
    let mut worst_at = String::new();
    for name in tensor_names(model) {
        let len = tensor_mut(model, &name).len();
        for idx in 0..len {
            if name == "embedding" && idx < embed {
                continue; // pad row
            }
            let original = tensor_mut(model, &name)[idx];
            tensor_mut(model, &name)[idx] = original + h;
            let up = batch_loss(model, seqs, labels, masks, lambda);
            tensor_mut(model, &name)[idx] = original - h;
            let down = batch_loss(model, seqs, labels, masks, lambda);
            tensor_mut(model, &name)[idx] = original;

            let numeric = (up - down) / (2.0 * h);
            let a = tensor_grad(&analytic, &name)[idx];
            let abs_diff = (a - numeric).abs();
            let rel = abs_diff / a.abs().max(numeric.abs()).max(1e-8);
            if rel > worst_rel {
                worst_rel = rel;
                worst_at = format!("{name}[{idx}]");
            }
            assert!(
                rel <= tol || abs_diff <= 1e-10,
                "{name}[{idx}]: analytic {a:.12e} vs numeric {numeric:.12e} (rel {rel:.3e})"
            );
            checked += 1;
        }
    }
    GradCheckReport {
        checked,
        worst_rel,
        worst_at,
    }
}

/// Builds a random tiny classifier plus a random batch for gradient checks.
#[allow(clippy::type_complexity)]
pub fn random_tiny_setup(
    seed: u64,
    direction: Direction,
    masking: bool,
) -> (SequenceClassifier, Vec<EncodedSequence>, Vec<u8>) {
    let mut rng = Rng::new(seed).derive("gradcheck-setup");
    let hidden = 1 + rng.below(8) as usize;
    let embed = 1 + rng.below(5) as usize;
    let vocab = 4 + rng.below(17) as usize; // <= 20
    let seq_len = 1 + rng.below(6) as usize;

    let model = SequenceClassifier::init(
        ModelDims {
            vocab,
            embed,
            hidden,
            seq_len,
        },
        direction,
        0.0,
        0.0,
        masking,
        "gradcheck".into(),
        seed,
    )
    .unwrap();

    let batch = 1 + rng.below(3) as usize;
    let mut seqs = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..batch {
        let true_length = 1 + rng.below(seq_len as u64) as usize;
        let mut ids: Vec<u32> = (0..true_length)
            .map(|_| 2 + rng.below(vocab as u64 - 2) as u32)
            .collect();
        ids.resize(seq_len, 0);
        seqs.push(EncodedSequence { ids, true_length });
        labels.push((rng.next_u64() & 1) as u8);
    }
    (model, seqs, labels)
}
