//! TF-IDF uni/bi-gram feature extraction and the classical comparison
//! models: k-NN, SVM (SMO, polynomial kernel), decision tree, multinomial
//! naive Bayes, and a one-hidden-layer MLP.

mod tfidf;

pub use tfidf::{TfidfConfig, TfidfModel};
