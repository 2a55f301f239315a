use crate::error::{Error, Result};
use crate::exec::Mode;
use crate::linalg::{adam_step, AdamState, Matrix, Rng};
use crate::neural::backward::fused_step;
use crate::neural::forward::{bce_l2_loss, predict_batch, predict_label};
use crate::neural::params::{Direction, LstmParams, ModelDims, SequenceClassifier};
use crate::text::{encode, tokenize, EncodedSequence, LabeledDataset, Vocabulary};
use serde::{Deserialize, Serialize};

/// Training hyperparameters. Defaults: embedding 200, Adam at 1e-3,
/// batch 64, 25 epochs, dropout 0.5, L2 1e-4, sequences padded to 1000,
/// hidden width 128.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub direction: Direction,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden_size: usize,
    pub embedding_size: usize,
    pub seq_len: usize,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    pub validation_fraction: f64,
    pub masking: bool,
    pub vocab_cap: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            direction: Direction::Bidirectional,
            epochs: 25,
            batch_size: 64,
            learning_rate: 1e-3,
            hidden_size: 128,
            embedding_size: 200,
            seq_len: 1000,
            dropout_rate: 0.5,
            l2_lambda: 1e-4,
            validation_fraction: 0.2,
            masking: false,
            vocab_cap: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.epochs < 1 {
            problems.push("epochs must be >= 1".to_string());
        }
        if self.batch_size < 1 {
            problems.push("batch_size must be >= 1".to_string());
        }
        if !(self.learning_rate > 0.0) {
            problems.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.hidden_size < 1 {
            problems.push("hidden_size must be >= 1".to_string());
        }
        if self.embedding_size < 1 {
            problems.push("embedding_size must be >= 1".to_string());
        }
        if self.seq_len < 1 {
            problems.push("seq_len must be >= 1".to_string());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            problems.push(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate));
        }
        if self.l2_lambda < 0.0 {
            problems.push(format!("l2_lambda must be >= 0, got {}", self.l2_lambda));
        }
        if !(0.0 < self.validation_fraction && self.validation_fraction < 1.0) {
            problems.push(format!(
                "validation_fraction must be in (0, 1), got {}",
                self.validation_fraction
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }
}

/// One row of the training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

/// Trained model plus everything needed to reproduce and inspect the run.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: SequenceClassifier,
    pub vocabulary: Vocabulary,
    pub history: Vec<EpochStats>,
    /// Positions (into the dataset handed to `train`) used for gradient
    /// updates and for the validation carve-out.
    pub train_positions: Vec<usize>,
    pub val_positions: Vec<usize>,
}

/// Encodes every record of a cleaned dataset to fixed-length id sequences.
pub fn encode_dataset(
    dataset: &LabeledDataset,
    vocab: &Vocabulary,
    seq_len: usize,
) -> Result<Vec<EncodedSequence>> {
    dataset
        .records
        .iter()
        .map(|r| encode(&tokenize(&r.text), vocab, seq_len))
        .collect()
}

/// Loss and accuracy of a model over encoded examples, dropout-free.
pub fn evaluate(
    model: &SequenceClassifier,
    seqs: &[&EncodedSequence],
    labels: &[u8],
    mode: Mode,
) -> Result<(f64, f64)> {
    let probs = predict_batch(model, seqs, mode)?;
    let loss = bce_l2_loss(&probs, labels, model, model.l2_lambda)?;
    let correct = probs
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| predict_label(p) == y)
        .count();
    Ok((loss, correct as f64 / labels.len() as f64))
}

/// Adam moments for every trainable tensor.
struct Optimizer {
    emb: AdamState,
    fwd: LaneStates,
    bwd: Option<LaneStates>,
    head_w: AdamState,
    head_b: AdamState,
    t: u64,
}

struct LaneStates {
    w_f: AdamState,
    w_i: AdamState,
    w_c: AdamState,
    w_o: AdamState,
    b_f: AdamState,
    b_i: AdamState,
    b_c: AdamState,
    b_o: AdamState,
}

impl LaneStates {
    fn like(p: &LstmParams) -> LaneStates {
        LaneStates {
            w_f: AdamState::like(&p.w_f),
            w_i: AdamState::like(&p.w_i),
            w_c: AdamState::like(&p.w_c),
            w_o: AdamState::like(&p.w_o),
            b_f: AdamState::like(&p.b_f),
            b_i: AdamState::like(&p.b_i),
            b_c: AdamState::like(&p.b_c),
            b_o: AdamState::like(&p.b_o),
        }
    }
}

impl Optimizer {
    fn new(model: &SequenceClassifier) -> Optimizer {
        Optimizer {
            emb: AdamState::like(&model.embedding),
            fwd: LaneStates::like(&model.forward),
            bwd: model.backward.as_ref().map(LaneStates::like),
            head_w: AdamState::like(&model.head_w),
            head_b: AdamState::like(&Matrix::zeros(1, 1)),
            t: 0,
        }
    }

    fn apply(
        &mut self,
        model: &mut SequenceClassifier,
        grads: &crate::neural::BatchGrads,
        lr: f64,
    ) -> Result<()> {
        self.t += 1;
        let t = self.t;
        adam_step(&mut model.embedding, &grads.embedding, &mut self.emb, t, lr)?;
        // The pad row is pinned: clear any drift in the row and its moments.
        model.embedding.row_mut(0).fill(0.0);
        self.emb.m.row_mut(0).fill(0.0);
        self.emb.v.row_mut(0).fill(0.0);

        let lane = |p: &mut LstmParams,
                        g: &crate::neural::LstmGrads,
                        s: &mut LaneStates|
         -> Result<()> {
            adam_step(&mut p.w_f, &g.w_f, &mut s.w_f, t, lr)?;
            adam_step(&mut p.w_i, &g.w_i, &mut s.w_i, t, lr)?;
            adam_step(&mut p.w_c, &g.w_c, &mut s.w_c, t, lr)?;
            adam_step(&mut p.w_o, &g.w_o, &mut s.w_o, t, lr)?;
            adam_step(&mut p.b_f, &g.b_f, &mut s.b_f, t, lr)?;
            adam_step(&mut p.b_i, &g.b_i, &mut s.b_i, t, lr)?;
            adam_step(&mut p.b_c, &g.b_c, &mut s.b_c, t, lr)?;
            adam_step(&mut p.b_o, &g.b_o, &mut s.b_o, t, lr)?;
            Ok(())
        };
        lane(&mut model.forward, &grads.forward, &mut self.fwd)?;
        if let (Some(p), Some(g), Some(s)) = (
            model.backward.as_mut(),
            grads.backward.as_ref(),
            self.bwd.as_mut(),
        ) {
            lane(p, g, s)?;
        }
        adam_step(&mut model.head_w, &grads.head_w, &mut self.head_w, t, lr)?;

        let mut hb = Matrix::from_vec(1, 1, vec![model.head_b])?;
        let hb_grad = Matrix::from_vec(1, 1, vec![grads.head_b])?;
        adam_step(&mut hb, &hb_grad, &mut self.head_b, t, lr)?;
        model.head_b = hb.get(0, 0);
        Ok(())
    }
}

/// Inverted-dropout mask: each feature survives with probability
/// `1 - rate` and is scaled by `1/(1 - rate)` so inference needs no change.
fn dropout_mask(rng: &mut Rng, len: usize, rate: f64) -> Vec<f64> {
    let scale = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.next_f64() < rate { 0.0 } else { scale })
        .collect()
}

/// Trains a classifier on the given pool: cleans (idempotent), carves the
/// validation partition, fits the vocabulary, and runs seeded mini-batch
/// Adam with inverted dropout on the feature vector. Identical config and
/// seed reproduce the history and model bit for bit.
pub fn train(dataset: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let cleaned = dataset.clean_all();
    let n = cleaned.len();

    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(cfg.seed).derive("val-carve").shuffle(&mut order);
    let n_val = (cfg.validation_fraction * n as f64).floor() as usize;
    let (val_positions, train_positions) = {
        let (v, t) = order.split_at(n_val);
        (v.to_vec(), t.to_vec())
    };
    if train_positions.is_empty() || val_positions.is_empty() {
        return Err(Error::config(format!(
            "validation carve-out left an empty partition ({} train / {} validation from {n})",
            train_positions.len(),
            val_positions.len()
        )));
    }

    let vocabulary = Vocabulary::fit(&cleaned, cfg.vocab_cap)?;
    let encoded = encode_dataset(&cleaned, &vocabulary, cfg.seq_len)?;
    let labels = cleaned.labels();

    let mut model = SequenceClassifier::init(
        ModelDims {
            vocab: vocabulary.size(),
            embed: cfg.embedding_size,
            hidden: cfg.hidden_size,
            seq_len: cfg.seq_len,
        },
        cfg.direction,
        cfg.dropout_rate,
        cfg.l2_lambda,
        cfg.masking,
        vocabulary.fingerprint().to_string(),
        cfg.seed,
    )?;
    let mut opt = Optimizer::new(&model);
    let mode = Mode::auto();

    let shuffle_root = Rng::new(cfg.seed).derive("shuffle");
    let dropout_root = Rng::new(cfg.seed).derive("dropout");
    let val_seqs: Vec<&EncodedSequence> = val_positions.iter().map(|&i| &encoded[i]).collect();
    let val_labels: Vec<u8> = val_positions.iter().map(|&i| labels[i]).collect();

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let mut epoch_order = train_positions.clone();
        shuffle_root
            .derive_index(epoch as u64)
            .shuffle(&mut epoch_order);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut offset = 0u64;
        for batch in epoch_order.chunks(cfg.batch_size) {
            let seqs: Vec<&EncodedSequence> = batch.iter().map(|&i| &encoded[i]).collect();
            let ys: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
            let masks = if cfg.dropout_rate > 0.0 {
                Some(
                    (0..batch.len())
                        .map(|j| {
                            let mut mrng = dropout_root
                                .derive_index(((epoch as u64) << 32) | (offset + j as u64));
                            dropout_mask(&mut mrng, model.h_out(), cfg.dropout_rate)
                        })
                        .collect::<Vec<_>>(),
                )
            } else {
                None
            };
            offset += batch.len() as u64;

            let (grads, probs) =
                fused_step(&model, &seqs, masks.as_deref(), &ys, cfg.l2_lambda, mode)?;
            let batch_loss = bce_l2_loss(&probs, &ys, &model, cfg.l2_lambda)?;
            loss_sum += batch_loss * batch.len() as f64;
            correct += probs
                .iter()
                .zip(&ys)
                .filter(|(&p, &y)| predict_label(p) == y)
                .count();

            opt.apply(&mut model, &grads, cfg.learning_rate)?;
        }

        let (val_loss, val_acc) = evaluate(&model, &val_seqs, &val_labels, mode)?;
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_positions.len() as f64,
            train_acc: correct as f64 / train_positions.len() as f64,
            val_loss,
            val_acc,
        });
    }

    Ok(TrainOutput {
        model,
        vocabulary,
        history,
        train_positions,
        val_positions,
    })
}

/// Renders the per-epoch history as CSV (`epoch,train_loss,train_acc,
/// val_loss,val_acc`), full float precision.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_loss,val_acc\n");
    for h in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            h.epoch, h.train_loss, h.train_acc, h.val_loss, h.val_acc
        ));
    }
    out
}
