//! From-scratch binary text classification over short documents: an
//! embedding + (bi)directional LSTM classifier with hand-derived
//! backpropagation through time, TF-IDF uni/bi-gram classical baselines
//! (k-NN, SVM, decision tree, naive Bayes, MLP), and a seeded evaluation
//! harness (train/validation/test splits, 10-fold cross-validation,
//! confusion-matrix metrics).
//!
//! Everything is `f64` and deterministic: one top-level seed fans out to
//! named sub-streams, and data-parallel sections reduce in a fixed order so
//! sequential and parallel builds produce identical bytes.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod exec;
pub mod linalg;
pub mod neural;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
