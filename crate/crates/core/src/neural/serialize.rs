use crate::error::{Error, Result};
use crate::neural::params::{Direction, SequenceClassifier};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// On-disk envelope: version, content digest, then the full parameter set
/// as row-major arrays of decimal floats.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    digest: String,
    model: SequenceClassifier,
}

pub fn save_model(model: &SequenceClassifier, path: impl AsRef<Path>) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        digest: model.digest(),
        model: model.clone(),
    };
    let json = serde_json::to_string(&file).map_err(|e| Error::format(e.to_string()))?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Loads and verifies a model file. A partial or tampered file never yields
/// a model: the JSON must parse, the version must match, and the recomputed
/// digest must equal the stored one. When `expected` is given, a model of
/// the other direction is rejected explicitly.
pub fn load_model(
    path: impl AsRef<Path>,
    expected: Option<Direction>,
) -> Result<SequenceClassifier> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&raw)
        .map_err(|e| Error::format(format!("{}: {}", path.display(), e)))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::format(format!(
            "{}: unsupported model format_version {} (expected {})",
            path.display(),
            file.format_version,
            MODEL_FORMAT_VERSION
        )));
    }
    let recomputed = file.model.digest();
    if recomputed != file.digest {
        return Err(Error::format(format!(
            "{}: checksum mismatch (stored {}, recomputed {})",
            path.display(),
            file.digest,
            recomputed
        )));
    }
    if let Some(expected) = expected {
        if file.model.direction != expected {
            return Err(Error::format(format!(
                "{}: direction mismatch: expected {}, found {}",
                path.display(),
                expected,
                file.model.direction
            )));
        }
    }
    Ok(file.model)
}
