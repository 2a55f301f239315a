//! Embedding + (bi)directional LSTM classifier with hand-derived
//! backpropagation through time: gate-level forward pass, bidirectional
//! concatenation, inverted dropout, dense sigmoid head, binary cross-entropy
//! with L2, and a seeded mini-batch Adam training loop.

mod backward;
mod forward;
mod params;
mod serialize;
mod train;

pub use backward::{backward, BatchGrads, LstmGrads};
pub use forward::{
    bce_l2_loss, bilstm_forward, forward_batch, lstm_cell_forward, lstm_forward, predict_label,
    ForwardCache, Lane, LaneCache, LstmState,
};
pub use params::{Direction, LstmParams, ModelDims, SequenceClassifier};
pub use serialize::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use train::{history_csv, train, EpochStats, TrainConfig, TrainOutput};
