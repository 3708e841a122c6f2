use std::collections::HashSet;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{QAItem, ValidationReport};
use crate::jsonl::{self, JsonlError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("duplicate qa_id `{0}`")]
    DuplicateQaId(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Writes one JSON object per line.
pub fn write_dataset(path: &Path, items: &[QAItem]) -> Result<(), DatasetError> {
    Ok(jsonl::write(path, items)?)
}

/// Reads a dataset written by [`write_dataset`], rejecting duplicate ids.
pub fn read_dataset(path: &Path) -> Result<Vec<QAItem>, DatasetError> {
    let items: Vec<QAItem> = jsonl::read(path)?;
    let mut seen = HashSet::new();
    for item in &items {
        if !seen.insert(item.qa_id.as_str()) {
            return Err(DatasetError::DuplicateQaId(item.qa_id.clone()));
        }
    }
    Ok(items)
}

/// Writes `validation.csv` with one row per record.
pub fn write_validation_csv(path: &Path, report: &ValidationReport) -> Result<(), DatasetError> {
    let mut out = csv::Writer::from_path(path)?;
    out.write_record([
        "doc_id",
        "sum",
        "sum_check",
        "pcf",
        "pcf_dev",
        "pcf_check",
        "overall",
    ])?;
    for e in &report.entries {
        out.write_record([
            e.doc_id.as_str(),
            &e.sum.to_string(),
            e.sum_check.as_str(),
            &e.pcf.to_string(),
            &e.pcf_dev.map(|d| d.to_string()).unwrap_or_default(),
            e.pcf_check.as_str(),
            e.overall.as_str(),
        ])?;
    }
    out.flush().map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}
