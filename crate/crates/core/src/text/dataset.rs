use crate::error::{Error, Result};
use crate::text::clean;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

/// One document as read from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub index: i64,
    pub text: String,
    pub label: u8,
}

/// Where a dataset came from and whether cleaning has been applied.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub cleaned: bool,
}

/// Ordered collection of labeled documents; the unit flowing through splits
/// and folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub records: Vec<RawRecord>,
    pub provenance: Provenance,
}

/// A data row that failed validation, with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct RowIssue {
    pub line: u64,
    pub message: String,
}

/// Result of a lenient CSV load: valid rows plus every rejected row.
#[derive(Debug)]
pub struct CsvLoad {
    pub dataset: LabeledDataset,
    pub rejected: Vec<RowIssue>,
}

impl LabeledDataset {
    pub fn new(records: Vec<RawRecord>, provenance: Provenance) -> LabeledDataset {
        LabeledDataset {
            records,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (label-0 count, label-1 count).
    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.records.iter().filter(|r| r.label == 1).count();
        (self.records.len() - ones, ones)
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Records at the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> LabeledDataset {
        LabeledDataset {
            records: positions.iter().map(|&i| self.records[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// A copy with the cleaning rules applied to every text.
    pub fn clean_all(&self) -> LabeledDataset {
        LabeledDataset {
            records: self
                .records
                .iter()
                .map(|r| RawRecord {
                    index: r.index,
                    text: clean(&r.text),
                    label: r.label,
                })
                .collect(),
            provenance: Provenance {
                source: self.provenance.source.clone(),
                cleaned: true,
            },
        }
    }
}

fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| {
        let h = h.trim().trim_start_matches('\u{feff}').to_lowercase();
        names.contains(&h.as_str())
    })
}

/// Loads a dataset CSV with header `index,text,label` (`tweet` accepted as
/// an alias for `text`). Rows that fail validation are collected with their
/// line numbers, never silently dropped.
pub fn load_csv(path: impl AsRef<Path>) -> Result<CsvLoad> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::format(format!("{}: {}", path.display(), e)))?;

    let headers = rdr
        .headers()
        .map_err(|e| Error::format(format!("{}: {}", path.display(), e)))?
        .clone();
    let idx_col = find_column(&headers, &["index"]);
    let text_col = find_column(&headers, &["text", "tweet"]);
    let label_col = find_column(&headers, &["label"]);
    let missing: Vec<&str> = [
        (idx_col, "index"),
        (text_col, "text"),
        (label_col, "label"),
    ]
    .iter()
    .filter(|(c, _)| c.is_none())
    .map(|(_, n)| *n)
    .collect();
    if !missing.is_empty() {
        return Err(Error::format(format!(
            "{}: missing column(s): {}",
            path.display(),
            missing.join(", ")
        )));
    }
    let (idx_col, text_col, label_col) =
        (idx_col.unwrap(), text_col.unwrap(), label_col.unwrap());

    let mut records = Vec::new();
    let mut rejected = Vec::new();
    let mut seen_indices = HashSet::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let line = row_no as u64 + 2; // header is line 1
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RowIssue {
                    line,
                    message: format!("unparseable row: {e}"),
                });
                continue;
            }
        };
        let field = |col: usize| rec.get(col).unwrap_or("").trim();
        let index = match field(idx_col).parse::<i64>() {
            Ok(i) => i,
            Err(_) => {
                rejected.push(RowIssue {
                    line,
                    message: format!("index {:?} is not an integer", field(idx_col)),
                });
                continue;
            }
        };
        let label = match field(label_col) {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                rejected.push(RowIssue {
                    line,
                    message: format!("label {other:?} is not 0 or 1"),
                });
                continue;
            }
        };
        let text = rec.get(text_col).unwrap_or("").to_string();
        if text.is_empty() {
            rejected.push(RowIssue {
                line,
                message: "empty text".to_string(),
            });
            continue;
        }
        if !seen_indices.insert(index) {
            rejected.push(RowIssue {
                line,
                message: format!("duplicate index {index}"),
            });
            continue;
        }
        records.push(RawRecord { index, text, label });
    }

    Ok(CsvLoad {
        dataset: LabeledDataset::new(
            records,
            Provenance {
                source: path.display().to_string(),
                cleaned: false,
            },
        ),
        rejected,
    })
}

/// Like [`load_csv`] but any invalid row is an error, reporting every bad
/// line at once.
pub fn load_csv_strict(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let load = load_csv(&path)?;
    if !load.rejected.is_empty() {
        let lines = load
            .rejected
            .iter()
            .map(|i| format!("line {}: {}", i.line, i.message))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::format(format!(
            "{}: invalid rows: {}",
            path.as_ref().display(),
            lines
        )));
    }
    Ok(load.dataset)
}

/// Writes the dataset back out with the canonical `index,text,label` header,
/// RFC 4180 quoting.
pub fn write_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path.as_ref())?;
    wtr.write_record(["index", "text", "label"])
        .map_err(|e| Error::format(e.to_string()))?;
    for r in &dataset.records {
        wtr.write_record([r.index.to_string(), r.text.clone(), r.label.to_string()])
            .map_err(|e| Error::format(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
