use crate::error::{Error, Result};
use crate::linalg::{fnv1a, Matrix, Rng};
use serde::{Deserialize, Serialize};

/// Whether the recurrent part reads the sequence one way or both ways.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Bidirectional,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Forward => write!(f, "forward"),
            Direction::Bidirectional => write!(f, "bidirectional"),
        }
    }
}

/// Gate weights and biases for one recurrent lane. Each weight has shape
/// (hidden, hidden + embed) and acts on the concatenation `[h_prev, x_t]`;
/// biases are column vectors of length hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_f: Matrix,
    pub w_i: Matrix,
    pub w_c: Matrix,
    pub w_o: Matrix,
    pub b_f: Matrix,
    pub b_i: Matrix,
    pub b_c: Matrix,
    pub b_o: Matrix,
}

impl LstmParams {
    /// Glorot-uniform weights, zero biases except the forget-gate bias,
    /// which starts at 1.0 so early training does not erase the cell state.
    pub fn init(hidden: usize, embed: usize, rng: &mut Rng) -> Result<LstmParams> {
        let w = |rng: &mut Rng| Matrix::glorot(hidden, hidden + embed, rng);
        Ok(LstmParams {
            w_f: w(rng)?,
            w_i: w(rng)?,
            w_c: w(rng)?,
            w_o: w(rng)?,
            b_f: Matrix::filled(hidden, 1, 1.0),
            b_i: Matrix::zeros(hidden, 1),
            b_c: Matrix::zeros(hidden, 1),
            b_o: Matrix::zeros(hidden, 1),
        })
    }

    pub fn hidden(&self) -> usize {
        self.w_f.rows()
    }

    pub fn sum_sq_weights(&self) -> f64 {
        self.w_f.sum_sq() + self.w_i.sum_sq() + self.w_c.sum_sq() + self.w_o.sum_sq()
    }
}

/// Tensor dimensions of a classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub seq_len: usize,
}

/// Embedding + (bi)LSTM + dropout + dense-sigmoid head.
///
/// Invariants: the head width is `hidden` for forward-only models and
/// `2 * hidden` for bidirectional ones; embedding row 0 (padding) is all
/// zeros and never updated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceClassifier {
    pub dims: ModelDims,
    pub direction: Direction,
    pub embedding: Matrix,
    pub forward: LstmParams,
    pub backward: Option<LstmParams>,
    pub head_w: Matrix,
    pub head_b: f64,
    pub dropout_rate: f64,
    pub l2_lambda: f64,
    pub masking: bool,
    pub seed: u64,
    pub vocab_fingerprint: String,
}

impl SequenceClassifier {
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        dims: ModelDims,
        direction: Direction,
        dropout_rate: f64,
        l2_lambda: f64,
        masking: bool,
        vocab_fingerprint: String,
        seed: u64,
    ) -> Result<SequenceClassifier> {
        if dims.vocab < 2 {
            return Err(Error::config(
                "vocabulary must include at least the reserved pad/oov ids",
            ));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::config(format!(
                "dropout rate must be in [0, 1), got {dropout_rate}"
            )));
        }
        let mut rng = Rng::new(seed).derive("init");
        let mut embedding = Matrix::glorot(dims.vocab, dims.embed, &mut rng)?;
        embedding.row_mut(0).fill(0.0); // pad row carries no signal

        let forward = LstmParams::init(dims.hidden, dims.embed, &mut rng)?;
        let backward = match direction {
            Direction::Forward => None,
            Direction::Bidirectional => Some(LstmParams::init(dims.hidden, dims.embed, &mut rng)?),
        };
        let h_out = match direction {
            Direction::Forward => dims.hidden,
            Direction::Bidirectional => 2 * dims.hidden,
        };
        let head_w = Matrix::glorot(1, h_out, &mut rng)?;
        Ok(SequenceClassifier {
            dims,
            direction,
            embedding,
            forward,
            backward,
            head_w,
            head_b: 0.0,
            dropout_rate,
            l2_lambda,
            masking,
            seed,
            vocab_fingerprint,
        })
    }

    /// Width of the feature vector feeding the head.
    pub fn h_out(&self) -> usize {
        match self.direction {
            Direction::Forward => self.dims.hidden,
            Direction::Bidirectional => 2 * self.dims.hidden,
        }
    }

    /// Squared weights entering the L2 penalty: every weight matrix and the
    /// non-pad embedding rows. Biases and the pad row are excluded.
    pub fn sum_sq_weights(&self) -> f64 {
        let emb: f64 = (1..self.dims.vocab)
            .map(|r| self.embedding.row(r).iter().map(|x| x * x).sum::<f64>())
            .sum();
        let lanes = self.forward.sum_sq_weights()
            + self
                .backward
                .as_ref()
                .map(LstmParams::sum_sq_weights)
                .unwrap_or(0.0);
        emb + lanes + self.head_w.sum_sq()
    }

    /// Content hash over dimensions, flags, and every parameter bit pattern.
    /// Stored in model files to detect corruption.
    pub fn digest(&self) -> String {
        let mut bytes = Vec::new();
        for d in [
            self.dims.vocab,
            self.dims.embed,
            self.dims.hidden,
            self.dims.seq_len,
        ] {
            bytes.extend_from_slice(&(d as u64).to_le_bytes());
        }
        bytes.push(match self.direction {
            Direction::Forward => 0,
            Direction::Bidirectional => 1,
        });
        bytes.push(u8::from(self.masking));
        bytes.extend_from_slice(&self.seed.to_le_bytes());
        bytes.extend_from_slice(self.vocab_fingerprint.as_bytes());
        let mut tensor = |m: &Matrix| {
            for &x in m.data() {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        };
        tensor(&self.embedding);
        for lane in std::iter::once(&self.forward).chain(self.backward.iter()) {
            for m in [
                &lane.w_f, &lane.w_i, &lane.w_c, &lane.w_o, &lane.b_f, &lane.b_i, &lane.b_c,
                &lane.b_o,
            ] {
                tensor(m);
            }
        }
        tensor(&self.head_w);
        for x in [self.head_b, self.dropout_rate, self.l2_lambda] {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        format!("{:016x}", fnv1a(&bytes))
    }
}
