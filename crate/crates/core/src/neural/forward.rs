use crate::error::{Error, Result};
use crate::exec::{self, Mode};
use crate::linalg::{sigmoid, sigmoid_scalar, tanh_m, Matrix};
use crate::neural::params::{Direction, LstmParams, SequenceClassifier};
use crate::text::EncodedSequence;

/// Gate activations and states produced by one LSTM step.
#[derive(Debug, Clone)]
pub struct LstmState {
    /// Forget gate, in (0,1) per element.
    pub f: Matrix,
    /// Input gate, in (0,1).
    pub i: Matrix,
    /// Candidate state, in (-1,1). The cell update adds `i ⊙ c_tilde`.
    pub c_tilde: Matrix,
    /// Updated cell state `f ⊙ c_prev + i ⊙ c_tilde`.
    pub c: Matrix,
    /// Output gate, in (0,1).
    pub o: Matrix,
    /// Hidden state `o ⊙ tanh(c)`.
    pub h: Matrix,
}

/// One recurrent step over the concatenation `z = [h_prev, x_t]`:
/// forget/input/output gates through the logistic function, candidate
/// through tanh, multiplicative-plus-additive cell update, gated output.
pub fn lstm_cell_forward(
    x_t: &Matrix,
    h_prev: &Matrix,
    c_prev: &Matrix,
    p: &LstmParams,
) -> Result<LstmState> {
    let z = h_prev.vstack(x_t)?;
    cell_step(&z, c_prev, p)
}

fn cell_step(z: &Matrix, c_prev: &Matrix, p: &LstmParams) -> Result<LstmState> {
    let f = sigmoid(&p.w_f.matmul(z)?.add(&p.b_f)?);
    let i = sigmoid(&p.w_i.matmul(z)?.add(&p.b_i)?);
    let c_tilde = tanh_m(&p.w_c.matmul(z)?.add(&p.b_c)?);
    let c = f.hadamard(c_prev)?.add(&i.hadamard(&c_tilde)?)?;
    let o = sigmoid(&p.w_o.matmul(z)?.add(&p.b_o)?);
    let h = o.hadamard(&tanh_m(&c))?;
    Ok(LstmState {
        f,
        i,
        c_tilde,
        c,
        o,
        h,
    })
}

/// Which lane of the model to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    Forward,
    Backward,
}

/// Everything the backward pass needs about one timestep.
#[derive(Debug, Clone)]
pub struct StepCache {
    pub token: u32,
    /// Masking was on and this position is padding: state passed through.
    pub skipped: bool,
    /// Concatenation `[h_prev, x_t]`.
    pub z: Matrix,
    pub c_prev: Matrix,
    pub state: LstmState,
}

/// Per-timestep caches for one lane plus its final hidden state.
#[derive(Debug, Clone)]
pub struct LaneCache {
    pub steps: Vec<StepCache>,
    pub final_h: Matrix,
}

/// Runs one lane over the sequence. The forward lane reads positions first
/// to last, the backward lane last to first; both start from zero states.
/// With masking on, padding positions leave the state untouched.
pub fn lstm_forward(
    model: &SequenceClassifier,
    seq: &EncodedSequence,
    lane: Lane,
) -> Result<LaneCache> {
    let params = match lane {
        Lane::Forward => &model.forward,
        Lane::Backward => model
            .backward
            .as_ref()
            .ok_or_else(|| Error::usage("model has no backward lane"))?,
    };
    if seq.ids.len() > model.dims.seq_len {
        return Err(Error::shape(format!(
            "sequence length {} exceeds configured {}",
            seq.ids.len(),
            model.dims.seq_len
        )));
    }
    if let Some(&bad) = seq.ids.iter().find(|&&id| id as usize >= model.dims.vocab) {
        return Err(Error::shape(format!(
            "token id {bad} outside vocabulary of size {}",
            model.dims.vocab
        )));
    }

    let hidden = model.dims.hidden;
    let mut h = Matrix::zeros(hidden, 1);
    let mut c = Matrix::zeros(hidden, 1);
    let mut steps = Vec::with_capacity(seq.ids.len());

    let positions: Vec<usize> = match lane {
        Lane::Forward => (0..seq.ids.len()).collect(),
        Lane::Backward => (0..seq.ids.len()).rev().collect(),
    };
    for pos in positions {
        let token = seq.ids[pos];
        if model.masking && pos >= seq.true_length {
            steps.push(StepCache {
                token,
                skipped: true,
                z: Matrix::zeros(0, 0),
                c_prev: Matrix::zeros(0, 0),
                state: LstmState {
                    f: Matrix::zeros(0, 0),
                    i: Matrix::zeros(0, 0),
                    c_tilde: Matrix::zeros(0, 0),
                    c: c.clone(),
                    o: Matrix::zeros(0, 0),
                    h: h.clone(),
                },
            });
            continue;
        }
        let x = Matrix::column(model.embedding.row(token as usize));
        let z = h.vstack(&x)?;
        let state = cell_step(&z, &c, params)?;
        h = state.h.clone();
        let c_prev = std::mem::replace(&mut c, state.c.clone());
        steps.push(StepCache {
            token,
            skipped: false,
            z,
            c_prev,
            state,
        });
    }
    Ok(LaneCache { steps, final_h: h })
}

/// Final feature vector of a bidirectional model: the forward lane's last
/// hidden state concatenated with the backward lane's, length `2 * hidden`.
pub fn bilstm_forward(model: &SequenceClassifier, seq: &EncodedSequence) -> Result<Matrix> {
    if model.direction != Direction::Bidirectional {
        return Err(Error::usage("bilstm_forward requires a bidirectional model"));
    }
    let fwd = lstm_forward(model, seq, Lane::Forward)?;
    let bwd = lstm_forward(model, seq, Lane::Backward)?;
    fwd.final_h.vstack(&bwd.final_h)
}

/// Full per-example record kept around for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub fwd: LaneCache,
    pub bwd: Option<LaneCache>,
    /// Feature vector before dropout.
    pub features: Matrix,
    /// Inverted-dropout mask actually applied (entries 0 or 1/(1-rate)).
    pub dropout_mask: Option<Vec<f64>>,
    /// Feature vector the head saw.
    pub dropped: Matrix,
    pub prob: f64,
}

pub(crate) fn forward_one(
    model: &SequenceClassifier,
    seq: &EncodedSequence,
    dropout_mask: Option<&[f64]>,
) -> Result<ForwardCache> {
    let fwd = lstm_forward(model, seq, Lane::Forward)?;
    let (features, bwd) = match model.direction {
        Direction::Forward => (fwd.final_h.clone(), None),
        Direction::Bidirectional => {
            let bwd = lstm_forward(model, seq, Lane::Backward)?;
            (fwd.final_h.vstack(&bwd.final_h)?, Some(bwd))
        }
    };
    let dropped = match dropout_mask {
        Some(mask) => {
            if mask.len() != features.rows() {
                return Err(Error::shape(format!(
                    "dropout mask length {} vs feature length {}",
                    mask.len(),
                    features.rows()
                )));
            }
            let mut d = features.clone();
            for (v, m) in d.data_mut().iter_mut().zip(mask) {
                *v *= m;
            }
            d
        }
        None => features.clone(),
    };
    let logit = model.head_w.matmul(&dropped)?.get(0, 0) + model.head_b;
    Ok(ForwardCache {
        fwd,
        bwd,
        features,
        dropout_mask: dropout_mask.map(<[f64]>::to_vec),
        dropped,
        prob: sigmoid_scalar(logit),
    })
}

/// Forward pass over a batch. Examples are independent and may be evaluated
/// concurrently; results come back in input order. `masks` supplies one
/// inverted-dropout mask per example during training; `None` is inference.
pub fn forward_batch<S>(
    model: &SequenceClassifier,
    seqs: &[S],
    masks: Option<&[Vec<f64>]>,
    mode: Mode,
) -> Result<Vec<ForwardCache>>
where
    S: std::borrow::Borrow<EncodedSequence> + Sync,
{
    if let Some(m) = masks {
        if m.len() != seqs.len() {
            return Err(Error::shape(format!(
                "{} dropout masks for {} examples",
                m.len(),
                seqs.len()
            )));
        }
    }
    let caches = exec::map_indices(mode, seqs.len(), |i| {
        forward_one(model, seqs[i].borrow(), masks.map(|m| m[i].as_slice()))
    });
    caches.into_iter().collect()
}

/// Inference probabilities for a batch, dropout-free, in input order.
pub fn predict_batch<S>(model: &SequenceClassifier, seqs: &[S], mode: Mode) -> Result<Vec<f64>>
where
    S: std::borrow::Borrow<EncodedSequence> + Sync,
{
    exec::map_indices(mode, seqs.len(), |i| {
        forward_one(model, seqs[i].borrow(), None).map(|c| c.prob)
    })
    .into_iter()
    .collect()
}

impl SequenceClassifier {
    /// Inference probability for the positive class; dropout-free and
    /// deterministic.
    pub fn predict_proba(&self, seq: &EncodedSequence) -> Result<f64> {
        Ok(forward_one(self, seq, None)?.prob)
    }
}

/// Decision rule: label 1 exactly when the probability reaches 0.5.
pub fn predict_label(prob: f64) -> u8 {
    u8::from(prob >= 0.5)
}

/// Mean binary cross-entropy plus `(λ/2) Σ w²` over the model's weights
/// (biases and the pad embedding row excluded).
pub fn bce_l2_loss(
    probs: &[f64],
    labels: &[u8],
    model: &SequenceClassifier,
    lambda: f64,
) -> Result<f64> {
    if probs.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::usage("loss over an empty batch"));
    }
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(labels) {
        total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(total / probs.len() as f64 + 0.5 * lambda * model.sum_sq_weights())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use crate::neural::params::ModelDims;

    fn zero_params(hidden: usize, embed: usize) -> LstmParams {
        LstmParams {
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

    fn tiny_model(direction: Direction, masking: bool, seed: u64) -> SequenceClassifier {
        SequenceClassifier::init(
            ModelDims {
                vocab: 8,
                embed: 3,
                hidden: 2,
                seq_len: 6,
            },
            direction,
            0.0,
            0.0,
            masking,
            "fp".into(),
            seed,
        )
        .unwrap()
    }

    fn seq(ids: &[u32], true_length: usize) -> EncodedSequence {
        EncodedSequence {
            ids: ids.to_vec(),
            true_length,
        }
    }

    #[test]
    fn zero_parameters_give_half_gates_and_zero_state() {
        let p = zero_params(3, 2);
        let x = Matrix::column(&[0.4, -0.2]);
        let h0 = Matrix::zeros(3, 1);
        let c0 = Matrix::zeros(3, 1);
        let s = lstm_cell_forward(&x, &h0, &c0, &p).unwrap();
        for v in [&s.f, &s.i, &s.o] {
            assert!(v.data().iter().all(|&g| g == 0.5));
        }
        assert!(s.c_tilde.data().iter().all(|&g| g == 0.0));
        assert!(s.c.data().iter().all(|&g| g == 0.0));
        assert!(s.h.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn scalar_cell_matches_hand_evaluation() {
        // hidden = 1, embed = 1: every quantity is a scalar.
        let p = LstmParams {
            w_f: Matrix::from_vec(1, 2, vec![0.3, -0.5]).unwrap(),
            w_i: Matrix::from_vec(1, 2, vec![0.1, 0.7]).unwrap(),
            w_c: Matrix::from_vec(1, 2, vec![-0.4, 0.2]).unwrap(),
            w_o: Matrix::from_vec(1, 2, vec![0.6, -0.1]).unwrap(),
            b_f: Matrix::column(&[0.05]),
            b_i: Matrix::column(&[-0.02]),
            b_c: Matrix::column(&[0.11]),
            b_o: Matrix::column(&[0.07]),
        };
        let (h_prev, c_prev, x) = (0.2f64, -0.3f64, 0.9f64);
        let s = lstm_cell_forward(
            &Matrix::column(&[x]),
            &Matrix::column(&[h_prev]),
            &Matrix::column(&[c_prev]),
            &p,
        )
        .unwrap();

        // Independent scalar evaluation, gate by gate.
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let f = sig(0.3 * h_prev - 0.5 * x + 0.05);
        let i = sig(0.1 * h_prev + 0.7 * x - 0.02);
        let ct = (-0.4 * h_prev + 0.2 * x + 0.11f64).tanh();
        let c = f * c_prev + i * ct;
        let o = sig(0.6 * h_prev - 0.1 * x + 0.07);
        let h = o * c.tanh();

        assert!((s.f.get(0, 0) - f).abs() <= 1e-12);
        assert!((s.i.get(0, 0) - i).abs() <= 1e-12);
        assert!((s.c_tilde.get(0, 0) - ct).abs() <= 1e-12);
        assert!((s.c.get(0, 0) - c).abs() <= 1e-12);
        assert!((s.o.get(0, 0) - o).abs() <= 1e-12);
        assert!((s.h.get(0, 0) - h).abs() <= 1e-12);
    }

    #[test]
    fn saturated_gates_conserve_cell_state() {
        let mut p = zero_params(2, 2);
        p.b_f = Matrix::filled(2, 1, 40.0); // forget -> 1
        p.b_i = Matrix::filled(2, 1, -40.0); // input -> 0
        let v = Matrix::column(&[0.37, -0.81]);
        let s = lstm_cell_forward(
            &Matrix::column(&[1.0, -1.0]),
            &Matrix::zeros(2, 1),
            &v,
            &p,
        )
        .unwrap();
        for r in 0..2 {
            assert!((s.c.get(r, 0) - v.get(r, 0)).abs() <= 1e-12);
        }
    }

    #[test]
    fn forget_zero_leaves_only_input_path() {
        let mut p = zero_params(1, 1);
        p.b_f = Matrix::filled(1, 1, -40.0); // forget -> 0
        p.b_i = Matrix::filled(1, 1, 40.0); // input -> 1
        p.b_c = Matrix::filled(1, 1, 0.5);
        let s = lstm_cell_forward(
            &Matrix::column(&[0.0]),
            &Matrix::zeros(1, 1),
            &Matrix::column(&[5.0]),
            &p,
        )
        .unwrap();
        assert!((s.c.get(0, 0) - 0.5f64.tanh()).abs() <= 1e-9);
    }

    #[test]
    fn all_pad_with_masking_keeps_zero_state() {
        let mut model = tiny_model(Direction::Forward, true, 5);
        model.masking = true;
        let cache = lstm_forward(&model, &seq(&[0, 0, 0, 0], 0), Lane::Forward).unwrap();
        assert!(cache.final_h.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn masking_makes_padding_invisible() {
        let model = tiny_model(Direction::Forward, true, 6);
        let short = seq(&[2, 3, 4], 3);
        let padded = seq(&[2, 3, 4, 0, 0, 0], 3);
        let a = lstm_forward(&model, &short, Lane::Forward).unwrap();
        let b = lstm_forward(&model, &padded, Lane::Forward).unwrap();
        assert_eq!(a.final_h, b.final_h);
    }

    #[test]
    fn forward_is_deterministic() {
        let model = tiny_model(Direction::Bidirectional, false, 7);
        let s = seq(&[2, 5, 1, 3], 4);
        let a = bilstm_forward(&model, &s).unwrap();
        let b = bilstm_forward(&model, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bilstm_output_length_is_twice_hidden() {
        let model = tiny_model(Direction::Bidirectional, false, 8);
        let out = bilstm_forward(&model, &seq(&[2, 3], 2)).unwrap();
        assert_eq!(out.rows(), 4);
    }

    #[test]
    fn palindrome_with_tied_lanes_gives_equal_halves() {
        let mut model = tiny_model(Direction::Bidirectional, false, 9);
        model.backward = Some(model.forward.clone());
        let out = bilstm_forward(&model, &seq(&[2, 5, 2], 3)).unwrap();
        let h = model.dims.hidden;
        for r in 0..h {
            assert_eq!(out.get(r, 0), out.get(r + h, 0));
        }
    }

    #[test]
    fn bilstm_composes_two_single_direction_runs() {
        let model = tiny_model(Direction::Bidirectional, false, 10);
        let s = seq(&[4, 2, 6], 3);
        let fwd = lstm_forward(&model, &s, Lane::Forward).unwrap();
        let bwd = lstm_forward(&model, &s, Lane::Backward).unwrap();
        let composed = fwd.final_h.vstack(&bwd.final_h).unwrap();
        let direct = bilstm_forward(&model, &s).unwrap();
        for (a, b) in composed.data().iter().zip(direct.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn gate_ranges_hold_on_random_models() {
        for seed in 0..5 {
            let model = tiny_model(Direction::Forward, false, 100 + seed);
            let mut rng = Rng::new(seed);
            let ids: Vec<u32> = (0..6).map(|_| rng.below(8) as u32).collect();
            let cache = lstm_forward(&model, &seq(&ids, 6), Lane::Forward).unwrap();
            for st in &cache.steps {
                for g in [&st.state.f, &st.state.i, &st.state.o] {
                    assert!(g.data().iter().all(|&v| v > 0.0 && v < 1.0));
                }
                assert!(st.state.c_tilde.data().iter().all(|&v| v > -1.0 && v < 1.0));
                assert!(st.state.h.data().iter().all(|&v| v.abs() < 1.0));
            }
        }
    }

    #[test]
    fn zero_head_predicts_half() {
        let mut model = tiny_model(Direction::Forward, false, 11);
        model.head_w = Matrix::zeros(1, 2);
        model.head_b = 0.0;
        assert_eq!(model.predict_proba(&seq(&[2, 3, 4], 3)).unwrap(), 0.5);
    }

    #[test]
    fn probabilities_strictly_inside_unit_interval() {
        for seed in 0..50 {
            let model = tiny_model(Direction::Bidirectional, false, 200 + seed);
            let mut rng = Rng::new(seed);
            let ids: Vec<u32> = (0..4).map(|_| rng.below(8) as u32).collect();
            let p = model.predict_proba(&seq(&ids, 4)).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn threshold_rule() {
        assert_eq!(predict_label(0.5), 1);
        assert_eq!(predict_label(0.4999), 0);
        assert_eq!(predict_label(0.9), 1);
    }

    #[test]
    fn loss_fixed_points() {
        let model = tiny_model(Direction::Forward, false, 12);
        let ln2 = bce_l2_loss(&[0.5, 0.5], &[0, 1], &model, 0.0).unwrap();
        assert!((ln2 - std::f64::consts::LN_2).abs() <= 1e-12);

        let confident = bce_l2_loss(&[1e-12, 1.0 - 1e-12], &[0, 1], &model, 0.0).unwrap();
        assert!(confident < 1e-9);

        let mismatch = bce_l2_loss(&[0.5], &[0, 1], &model, 0.0);
        assert!(mismatch.is_err());
    }

    #[test]
    fn zero_weights_zero_penalty() {
        let mut model = tiny_model(Direction::Forward, false, 13);
        model.embedding = Matrix::zeros(8, 3);
        model.forward = zero_params(2, 3);
        model.head_w = Matrix::zeros(1, 2);
        let loss = bce_l2_loss(&[0.5], &[1], &model, 10.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() <= 1e-12);
    }

    #[test]
    fn oversized_sequence_is_shape_error() {
        let model = tiny_model(Direction::Forward, false, 14);
        let s = seq(&[2; 7], 7);
        assert!(matches!(
            lstm_forward(&model, &s, Lane::Forward),
            Err(Error::Shape(_))
        ));
    }
}
