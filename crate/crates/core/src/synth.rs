//! Synthetic keyword-separable corpora for smoke tests, benchmarks, and the
//! toolkit's own validation runs. Positive documents contain anxiety-themed
//! cue words, negative documents calm-themed ones, over a shared filler
//! vocabulary; the label is decidable from the cues alone.

use crate::linalg::Rng;
use crate::text::{LabeledDataset, Provenance, RawRecord};

const POSITIVE_CUES: [&str; 5] = ["cemas", "gelisah", "sedih", "takut", "khawatir"];
const NEGATIVE_CUES: [&str; 5] = ["tenang", "senang", "bahagia", "santai", "damai"];
const FILLER: [&str; 20] = [
    "hari", "ini", "aku", "merasa", "sekali", "banget", "yang", "dan", "juga", "lagi", "sama",
    "buat", "kalau", "tapi", "terus", "baru", "udah", "mau", "bisa", "ada",
];

/// Where the discriminative cue words are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuePlacement {
    /// Cues at random positions.
    Anywhere,
    /// Cues inside the first three tokens, stressing models that must carry
    /// early information across the whole sequence.
    NearStart,
}

/// Generates `n` labeled documents (alternating labels, so counts are
/// balanced within one). Texts are already lowercase and punctuation-free;
/// the cleaning rules leave them unchanged.
pub fn synthetic_corpus(n: usize, seed: u64, placement: CuePlacement) -> LabeledDataset {
    let mut rng = Rng::new(seed).derive("synth");
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let cues: &[&str] = if label == 1 {
            &POSITIVE_CUES
        } else {
            &NEGATIVE_CUES
        };
        let len = 12 + rng.below(9) as usize;
        let mut tokens: Vec<&str> = (0..len)
            .map(|_| FILLER[rng.below(FILLER.len() as u64) as usize])
            .collect();
        let span = match placement {
            CuePlacement::Anywhere => len,
            CuePlacement::NearStart => 3,
        };
        // Two cue mentions, at distinct positions within the span.
        let first = rng.below(span as u64) as usize;
        let mut second = rng.below(span as u64) as usize;
        if second == first {
            second = (second + 1) % span;
        }
        for pos in [first, second] {
            tokens[pos] = cues[rng.below(cues.len() as u64) as usize];
        }
        records.push(RawRecord {
            index: i as i64,
            text: tokens.join(" "),
            label,
        });
    }
    LabeledDataset::new(
        records,
        Provenance {
            source: format!("synthetic(n={n}, seed={seed}, {placement:?})"),
            cleaned: true,
        },
    )
}
