use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fmt;

use super::profile::{ExtractorProfile, FieldKind, builtin_profile, builtin_profiles};
use super::{Document, ExtractionRecord, Schema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    NoMatch,
    MultipleMatches,
    OutOfRange,
}

impl DiscardReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscardReason::NoMatch => "no_match",
            DiscardReason::MultipleMatches => "multiple_matches",
            DiscardReason::OutOfRange => "out_of_range",
        }
    }
}

/// Why a document was excluded from the dataset. Not an error: discarded
/// documents are logged and skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discard {
    pub doc_id: String,
    pub field: String,
    pub reason: DiscardReason,
}

impl fmt::Display for Discard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({})",
            self.doc_id,
            self.field,
            self.reason.as_str()
        )
    }
}

/// Extracts the profile's fields from a document.
pub fn extract_fields(
    doc: &Document,
    profile: &ExtractorProfile,
) -> Result<ExtractionRecord, Discard> {
    extract_text(&doc.doc_id, &doc.raw_text, profile)
}

/// Extracts with the built-in profile named by the document's metadata.
pub fn extract_document(doc: &Document) -> Result<ExtractionRecord, Discard> {
    extract_fields(doc, builtin_profile(doc.company_profile))
}

/// Tries every built-in profile on bare text and returns the first record.
/// Used when the layout of a reference is not known in advance.
pub fn extract_any(doc_id: &str, text: &str) -> Result<ExtractionRecord, Discard> {
    let mut first_discard = None;
    for profile in builtin_profiles() {
        match extract_text(doc_id, text, profile) {
            Ok(record) => return Ok(record),
            Err(discard) => {
                first_discard.get_or_insert(discard);
            }
        }
    }
    Err(first_discard.expect("at least one built-in profile"))
}

pub(crate) fn extract_text(
    doc_id: &str,
    text: &str,
    profile: &ExtractorProfile,
) -> Result<ExtractionRecord, Discard> {
    let discard = |field: &str, reason| Discard {
        doc_id: doc_id.to_string(),
        field: field.to_string(),
        reason,
    };

    let mut product_name = None;
    let mut product_type = None;
    let mut total_pcf = None;
    let mut stages: Vec<(usize, String, f64)> = Vec::new();
    let mut components: Vec<(usize, String, f64)> = Vec::new();

    for field in &profile.fields {
        let mut matches = field.regex.captures_iter(text);
        let Some(caps) = matches.next() else {
            if field.required {
                return Err(discard(&field.field, DiscardReason::NoMatch));
            }
            continue;
        };
        if matches.next().is_some() {
            return Err(discard(&field.field, DiscardReason::MultipleMatches));
        }
        let capture = caps.get(1).expect("profile patterns have one capture");
        let position = caps.get(0).map_or(0, |m| m.start());
        let raw = capture.as_str().trim();

        if !field.kind.is_numeric() {
            let value = raw.to_string();
            match field.kind {
                FieldKind::ProductName => product_name = Some(value),
                _ => product_type = Some(value),
            }
            continue;
        }

        let value: f64 = raw
            .parse()
            .map_err(|_| discard(&field.field, DiscardReason::OutOfRange))?;
        match &field.kind {
            FieldKind::TotalPcf => total_pcf = Some(value),
            FieldKind::Stage(name) | FieldKind::Component(name) => {
                if !(0.0..=100.0).contains(&value) {
                    return Err(discard(&field.field, DiscardReason::OutOfRange));
                }
                let entry = (position, name.clone(), value);
                if matches!(field.kind, FieldKind::Stage(_)) {
                    stages.push(entry);
                } else {
                    components.push(entry);
                }
            }
            FieldKind::ProductName | FieldKind::ProductType => unreachable!(),
        }
    }

    if components.is_empty() {
        return Err(discard("components", DiscardReason::NoMatch));
    }
    let in_text_order = |mut entries: Vec<(usize, String, f64)>| -> IndexMap<String, f64> {
        entries.sort_by_key(|(position, ..)| *position);
        entries.into_iter().map(|(_, name, v)| (name, v)).collect()
    };

    let lifecycle_percents = match profile.schema {
        Schema::LifecycleBreakdown => Some(in_text_order(stages)),
        Schema::DirectComponent => None,
    };
    Ok(ExtractionRecord {
        doc_id: doc_id.to_string(),
        product_name: product_name
            .ok_or_else(|| discard("product_name", DiscardReason::NoMatch))?,
        product_type: product_type
            .ok_or_else(|| discard("product_type", DiscardReason::NoMatch))?,
        total_pcf: total_pcf.ok_or_else(|| discard("total_pcf", DiscardReason::NoMatch))?,
        lifecycle_percents,
        component_percents: in_text_order(components),
        schema: profile.schema,
    })
}

#[cfg(test)]
mod tests {
    use super::super::CompanyProfile;
    use super::*;

    const HP_TEXT: &str = "Product Carbon Footprint Report
Product name: Zentra K4821A
Product type: laptop
Product Carbon Footprint (PCF) 505 kgCO2e
Manufacturing 50%
Use 45.5%
Distribution
4%
End of life 0.5%
Manufacturing carbon footprint breakdown
Display 24%
Solid State Drive (SSD) 21%
Mainboard and other boards 30%
Chassis 25%";

    fn hp_doc(text: &str) -> Document {
        Document::new("doc0001", CompanyProfile::Hp, text, 1)
    }

    #[test]
    fn extracts_all_hp_fields_in_text_order() {
        let record = extract_document(&hp_doc(HP_TEXT)).unwrap();
        assert_eq!(record.product_name, "Zentra K4821A");
        assert_eq!(record.product_type, "laptop");
        assert_eq!(record.total_pcf, 505.0);
        assert_eq!(record.schema, Schema::LifecycleBreakdown);
        let stages: Vec<_> = record
            .lifecycle_percents
            .as_ref()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.as_str(), *v))
            .collect();
        assert_eq!(
            stages,
            vec![
                ("manufacturing", 50.0),
                ("use", 45.5),
                ("distribution", 4.0),
                ("end_of_life", 0.5)
            ]
        );
        let components: Vec<_> = record.component_percents.keys().cloned().collect();
        assert_eq!(components, vec!["display", "ssd", "mainboard", "chassis"]);
        assert_eq!(record.component_percents["ssd"], 21.0);
    }

    #[test]
    fn duplicated_value_line_discards_document() {
        let text = format!("{HP_TEXT}\nBatteries 3%\nBatteries 4%");
        let discard = extract_document(&hp_doc(&text)).unwrap_err();
        assert_eq!(discard.field, "batteries");
        assert_eq!(discard.reason, DiscardReason::MultipleMatches);
    }

    #[test]
    fn missing_total_discards_document() {
        let text = HP_TEXT.replace("Product Carbon Footprint (PCF) 505 kgCO2e", "");
        let discard = extract_document(&hp_doc(&text)).unwrap_err();
        assert_eq!(discard.field, "total_pcf");
        assert_eq!(discard.reason, DiscardReason::NoMatch);
    }

    #[test]
    fn percent_above_hundred_is_out_of_range() {
        let text = HP_TEXT.replace("Chassis 25%", "Chassis 250%");
        let discard = extract_document(&hp_doc(&text)).unwrap_err();
        assert_eq!(discard.reason, DiscardReason::OutOfRange);
    }

    #[test]
    fn no_components_discards_document() {
        let text: String = HP_TEXT.lines().take(9).collect::<Vec<_>>().join("\n");
        let discard = extract_document(&hp_doc(&text)).unwrap_err();
        assert_eq!(discard.field, "components");
    }

    #[test]
    fn extract_any_falls_back_to_direct_layout() {
        let text = "Model: Orbis Q1234Z\nCategory: desktop\nTotal carbon footprint: 312.4 kg CO2e\nSSD: 12.5 %\nDisplay: 87.5%";
        let record = extract_any("d9", text).unwrap();
        assert_eq!(record.schema, Schema::DirectComponent);
        assert_eq!(record.lifecycle_percents, None);
        assert_eq!(record.total_pcf, 312.4);
        assert_eq!(record.component_percents.len(), 2);
    }

    #[test]
    fn extract_any_reports_discard_for_unreadable_text() {
        assert!(extract_any("d9", "nothing here").is_err());
    }
}
