//! Dataset ingestion, text cleaning, whitespace tokenization, vocabulary
//! construction, integer encoding, and zero-padding.

mod clean;
mod dataset;
mod vocab;

pub use clean::{clean, tokenize};
pub use dataset::{
    load_csv, load_csv_strict, write_csv, CsvLoad, LabeledDataset, Provenance, RawRecord,
    RowIssue,
};
pub use vocab::{encode, EncodedSequence, Vocabulary, OOV_ID, PAD_ID};
