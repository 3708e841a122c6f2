use serde::{Deserialize, Serialize};

use crate::corpus::ExtractionRecord;

/// Slack for floating-point sums landing exactly on a threshold.
const EPS: f64 = 1e-9;
pub const SUM_LOW: f64 = 99.0;
pub const SUM_HIGH: f64 = 101.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// Not enough records for the check to mean anything.
    NotApplicable,
}

impl CheckStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::NotApplicable => "not_applicable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Validated,
    NeedsReview,
}

impl Overall {
    pub fn as_str(self) -> &'static str {
        match self {
            Overall::Validated => "validated",
            Overall::NeedsReview => "needs_review",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub doc_id: String,
    /// Sum of the component percentages.
    pub sum: f64,
    pub sum_check: CheckStatus,
    pub pcf: f64,
    /// `|pcf - corpus mean|`, absent when the check is not applicable.
    pub pcf_dev: Option<f64>,
    pub pcf_check: CheckStatus,
    pub overall: Overall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
    pub mean_pcf: Option<f64>,
    /// Mean absolute deviation of total footprints from their mean.
    pub mae: Option<f64>,
}

impl ValidationReport {
    pub fn needs_review(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries
            .iter()
            .filter(|e| e.overall == Overall::NeedsReview)
    }
}

/// Flags records whose component percentages do not sum to 99–101 or
/// whose total footprint lies more than twice the mean absolute deviation
/// from the corpus mean. Nothing is corrected; flagged records are left for
/// manual review.
pub fn validate_records(records: &[ExtractionRecord]) -> ValidationReport {
    let stats = if records.len() >= 2 {
        let n = records.len() as f64;
        let mean = records.iter().map(|r| r.total_pcf).sum::<f64>() / n;
        let mae = records
            .iter()
            .map(|r| (r.total_pcf - mean).abs())
            .sum::<f64>()
            / n;
        Some((mean, mae))
    } else {
        None
    };

    let entries = records
        .iter()
        .map(|record| {
            let sum = record.component_sum();
            let sum_check = if (SUM_LOW - EPS..=SUM_HIGH + EPS).contains(&sum) {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            let (pcf_dev, pcf_check) = match stats {
                Some((mean, mae)) => {
                    let dev = (record.total_pcf - mean).abs();
                    let check = if dev - 2.0 * mae > EPS {
                        CheckStatus::Fail
                    } else {
                        CheckStatus::Pass
                    };
                    (Some(dev), check)
                }
                None => (None, CheckStatus::NotApplicable),
            };
            let overall = if sum_check == CheckStatus::Pass && pcf_check == CheckStatus::Pass {
                Overall::Validated
            } else {
                Overall::NeedsReview
            };
            ValidationEntry {
                doc_id: record.doc_id.clone(),
                sum,
                sum_check,
                pcf: record.total_pcf,
                pcf_dev,
                pcf_check,
                overall,
            }
        })
        .collect();

    ValidationReport {
        entries,
        mean_pcf: stats.map(|s| s.0),
        mae: stats.map(|s| s.1),
    }
}
