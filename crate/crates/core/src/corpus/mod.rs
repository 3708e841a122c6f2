//! Report documents, field extraction and synthetic corpora.

mod extract;
mod io;
mod profile;
mod synth;

pub use extract::{Discard, DiscardReason, extract_any, extract_document, extract_fields};
pub use io::{
    COMPONENTS_FILE, DISCARDS_FILE, LIFECYCLE_FILE, MANIFEST_FILE, RECORDS_FILE, load_corpus,
    write_corpus, write_extraction,
};
pub use profile::{
    COMPONENTS, ComponentInfo, ExtractorProfile, FieldKind, FieldPattern, LIFECYCLE_STAGES,
    NUMBER_PATTERN, ProfileError, StageInfo, builtin_profile, builtin_profiles, component_info,
    stage_info,
};
#[cfg(test)]
pub(crate) use synth::INTRO;
pub use synth::{SynthConfig, SynthError, synthesize_corpus};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Extraction profile a document's layout follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompanyProfile {
    /// Lifecycle stage percentages, then component percentages of manufacturing.
    Hp,
    /// Component percentages of the total footprint, no lifecycle table.
    Direct,
}

impl CompanyProfile {
    pub const ALL: [CompanyProfile; 2] = [CompanyProfile::Hp, CompanyProfile::Direct];

    pub fn as_str(self) -> &'static str {
        match self {
            CompanyProfile::Hp => "hp",
            CompanyProfile::Direct => "direct",
        }
    }

    pub fn schema(self) -> Schema {
        match self {
            CompanyProfile::Hp => Schema::LifecycleBreakdown,
            CompanyProfile::Direct => Schema::DirectComponent,
        }
    }
}

impl fmt::Display for CompanyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CompanyProfile {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hp" => Ok(CompanyProfile::Hp),
            "direct" => Ok(CompanyProfile::Direct),
            other => Err(CorpusError::UnknownProfile(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    LifecycleBreakdown,
    DirectComponent,
}

impl Schema {
    pub fn as_str(self) -> &'static str {
        match self {
            Schema::LifecycleBreakdown => "lifecycle_breakdown",
            Schema::DirectComponent => "direct_component",
        }
    }
}

/// One report's extracted raw text plus identity metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub company_profile: CompanyProfile,
    pub raw_text: String,
    pub page_count: u32,
    /// Number of Unicode scalar values in `raw_text`.
    pub char_count: usize,
    /// Number of whitespace-separated tokens in `raw_text`.
    pub word_count: usize,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        company_profile: CompanyProfile,
        raw_text: impl Into<String>,
        page_count: u32,
    ) -> Self {
        let raw_text = raw_text.into();
        Document {
            doc_id: doc_id.into(),
            company_profile,
            char_count: raw_text.chars().count(),
            word_count: raw_text.split_whitespace().count(),
            raw_text,
            page_count: page_count.max(1),
        }
    }
}

/// Structured fields parsed from one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub doc_id: String,
    pub product_name: String,
    pub product_type: String,
    /// Total product carbon footprint in kgCO2e.
    pub total_pcf: f64,
    /// Stage name to percent of the total, in document order.
    pub lifecycle_percents: Option<IndexMap<String, f64>>,
    /// Component name to percent, in order of first appearance in the text.
    pub component_percents: IndexMap<String, f64>,
    pub schema: Schema,
}

impl ExtractionRecord {
    pub fn component_sum(&self) -> f64 {
        self.component_percents.values().sum()
    }

    pub fn manufacturing_percent(&self) -> Option<f64> {
        self.lifecycle_percents
            .as_ref()
            .and_then(|stages| stages.get("manufacturing").copied())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus manifest not found at {0}")]
    MissingManifest(std::path::PathBuf),
    #[error("duplicate doc_id `{0}` in manifest")]
    DuplicateDocId(String),
    #[error("{path}: file is not valid UTF-8")]
    NonUtf8 { path: std::path::PathBuf },
    #[error("unknown company profile `{0}`")]
    UnknownProfile(String),
    #[error("manifest row {row}: {message}")]
    BadManifestRow { row: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
