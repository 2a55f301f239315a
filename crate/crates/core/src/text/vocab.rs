use crate::error::{Error, Result};
use crate::linalg::fnv1a;
use crate::text::{tokenize, LabeledDataset};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Reserved id for padding positions.
pub const PAD_ID: u32 = 0;
/// Reserved id for out-of-vocabulary tokens.
pub const OOV_ID: u32 = 1;

/// Token-to-id map fitted on a cleaned corpus. Ids start at 2 (0 and 1 are
/// reserved) and are assigned by descending corpus frequency with a
/// lexicographic tie-break, so fitting is fully deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: BTreeMap<String, u32>,
    /// FNV-1a hash over the sorted (token, id) pairs; models record it so a
    /// mismatched vocabulary is detected at prediction time.
    fingerprint: String,
}

impl Vocabulary {
    /// Fits on the corpus texts. `cap`, when given, bounds the total id
    /// space including the two reserved ids.
    pub fn fit(corpus: &LabeledDataset, cap: Option<usize>) -> Result<Vocabulary> {
        let mut freq: BTreeMap<String, u64> = BTreeMap::new();
        for rec in &corpus.records {
            for tok in tokenize(&rec.text) {
                *freq.entry(tok).or_insert(0) += 1;
            }
        }
        if freq.is_empty() {
            return Err(Error::usage(
                "cannot fit a vocabulary on an empty corpus",
            ));
        }
        let mut ranked: Vec<(String, u64)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let keep = cap.map(|c| c.saturating_sub(2)).unwrap_or(usize::MAX);
        let tokens: BTreeMap<String, u32> = ranked
            .into_iter()
            .take(keep)
            .enumerate()
            .map(|(i, (tok, _))| (tok, i as u32 + 2))
            .collect();
        let fingerprint = fingerprint_of(&tokens);
        Ok(Vocabulary {
            tokens,
            fingerprint,
        })
    }

    /// Id for a token; absent tokens map to [`OOV_ID`].
    pub fn lookup(&self, token: &str) -> u32 {
        self.tokens.get(token).copied().unwrap_or(OOV_ID)
    }

    /// Total id space: corpus tokens plus the two reserved ids.
    pub fn size(&self) -> usize {
        self.tokens.len() + 2
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn tokens(&self) -> &BTreeMap<String, u32> {
        &self.tokens
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = VocabularyFile {
            metadata: VocabularyMetadata {
                pad_id: PAD_ID,
                oov_id: OOV_ID,
                size: self.size(),
                fingerprint: self.fingerprint.clone(),
            },
            tokens: self.tokens.clone(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vocabulary> {
        let raw = std::fs::read_to_string(path.as_ref())?;
        let file: VocabularyFile = serde_json::from_str(&raw).map_err(|e| {
            Error::format(format!("{}: {}", path.as_ref().display(), e))
        })?;
        let recomputed = fingerprint_of(&file.tokens);
        if recomputed != file.metadata.fingerprint {
            return Err(Error::format(format!(
                "{}: vocabulary fingerprint mismatch (stored {}, recomputed {})",
                path.as_ref().display(),
                file.metadata.fingerprint,
                recomputed
            )));
        }
        Ok(Vocabulary {
            tokens: file.tokens,
            fingerprint: file.metadata.fingerprint,
        })
    }
}

fn fingerprint_of(tokens: &BTreeMap<String, u32>) -> String {
    let mut bytes = Vec::new();
    for (tok, id) in tokens {
        bytes.extend_from_slice(tok.as_bytes());
        bytes.push(0);
        bytes.extend_from_slice(&id.to_le_bytes());
    }
    format!("{:016x}", fnv1a(&bytes))
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    metadata: VocabularyMetadata,
    tokens: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyMetadata {
    pad_id: u32,
    oov_id: u32,
    size: usize,
    fingerprint: String,
}

/// Fixed-length integer encoding of one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub ids: Vec<u32>,
    pub true_length: usize,
}

/// Maps tokens to ids (unknown tokens to [`OOV_ID`]), truncates at the tail
/// beyond `target_len`, and post-pads with [`PAD_ID`] up to `target_len`.
pub fn encode(tokens: &[String], vocab: &Vocabulary, target_len: usize) -> Result<EncodedSequence> {
    if target_len < 1 {
        return Err(Error::config("sequence length must be at least 1"));
    }
    let mut ids: Vec<u32> = tokens
        .iter()
        .take(target_len)
        .map(|t| vocab.lookup(t))
        .collect();
    let true_length = ids.len();
    ids.resize(target_len, PAD_ID);
    Ok(EncodedSequence { ids, true_length })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{Provenance, RawRecord};

    fn corpus(texts: &[&str]) -> LabeledDataset {
        LabeledDataset::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| RawRecord {
                    index: i as i64,
                    text: t.to_string(),
                    label: 0,
                })
                .collect(),
            Provenance::default(),
        )
    }

    #[test]
    fn frequency_then_lexicographic_order() {
        let v = Vocabulary::fit(&corpus(&["a b", "a"]), None).unwrap();
        assert_eq!(v.lookup("a"), 2);
        assert_eq!(v.lookup("b"), 3);

        let v = Vocabulary::fit(&corpus(&["z q", "z q"]), None).unwrap();
        assert_eq!(v.lookup("q"), 2);
        assert_eq!(v.lookup("z"), 3);
    }

    #[test]
    fn cap_keeps_most_frequent() {
        let v = Vocabulary::fit(&corpus(&["a a b c"]), Some(3)).unwrap();
        assert_eq!(v.size(), 3);
        assert_eq!(v.lookup("a"), 2);
        assert_eq!(v.lookup("b"), OOV_ID);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(Vocabulary::fit(&corpus(&[""]), None).is_err());
    }

    #[test]
    fn encode_pads_and_records_true_length() {
        let v = Vocabulary::fit(&corpus(&["cemas cemas berlebihan"]), None).unwrap();
        let toks = vec!["cemas".to_string(), "berlebihan".to_string()];
        let e = encode(&toks, &v, 5).unwrap();
        assert_eq!(e.ids, vec![2, 3, 0, 0, 0]);
        assert_eq!(e.true_length, 2);
    }

    #[test]
    fn unseen_token_maps_to_oov() {
        let v = Vocabulary::fit(&corpus(&["a"]), None).unwrap();
        let e = encode(&["baru".to_string()], &v, 2).unwrap();
        assert_eq!(e.ids[0], OOV_ID);
    }

    #[test]
    fn overlong_input_truncates_at_tail() {
        let v = Vocabulary::fit(&corpus(&["a"]), None).unwrap();
        let toks: Vec<String> = (0..1200).map(|_| "a".to_string()).collect();
        let e = encode(&toks, &v, 1000).unwrap();
        assert_eq!(e.ids.len(), 1000);
        assert_eq!(e.true_length, 1000);
        assert!(e.ids.iter().all(|&i| i == 2));
    }

    #[test]
    fn zero_target_length_is_config_error() {
        let v = Vocabulary::fit(&corpus(&["a"]), None).unwrap();
        assert!(encode(&[], &v, 0).is_err());
    }

    #[test]
    fn save_load_round_trip_keeps_fingerprint() {
        let v = Vocabulary::fit(&corpus(&["a b c a"]), None).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        v.save(f.path()).unwrap();
        let again = Vocabulary::load(f.path()).unwrap();
        assert_eq!(v, again);
    }
}
