use super::program::TOTAL_TARGET;
use super::{Direction, QuestionType};
use crate::corpus::{ExtractionRecord, component_info, stage_info};

/// Number of phrasings available for a question type and target set.
pub(crate) fn variant_count(qtype: QuestionType) -> usize {
    match qtype {
        QuestionType::WordMatch | QuestionType::MaxMin(_) | QuestionType::TopN(_) => 2,
        QuestionType::Calculation => 3,
    }
}

fn is_total_only(targets: &[String]) -> bool {
    targets.len() == 1 && targets[0] == TOTAL_TARGET
}

/// Phrase used for a target inside question text.
pub(crate) fn target_display(name: &str) -> &str {
    if name == TOTAL_TARGET {
        return "total";
    }
    component_info(name)
        .map(|c| c.display)
        .or_else(|| stage_info(name).map(|s| s.display))
        .unwrap_or(name)
}

/// Joins phrases as `a`, `a and b`, `a, b and c`.
pub(crate) fn join_list(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Instantiates the question template `variant` (taken modulo the number of
/// variants) with the record's product and the targets.
///
/// Variant 0 is the canonical phrasing for each type.
pub fn question_text(
    record: &ExtractionRecord,
    qtype: QuestionType,
    targets: &[String],
    variant: usize,
) -> String {
    let product = format!("{} {}", record.product_name, record.product_type);
    let names: Vec<&str> = targets.iter().map(|t| target_display(t)).collect();
    let listed = join_list(&names);
    let variant = variant % variant_count(qtype);
    match qtype {
        QuestionType::WordMatch if is_total_only(targets) => match variant {
            0 => format!("What is the total carbon footprint of the {product}?"),
            _ => format!("How much is the total carbon footprint of the {product} in kgCO2e?"),
        },
        QuestionType::WordMatch => match variant {
            0 => format!("What is the percentage share of {listed} in the {product}?"),
            _ => format!(
                "What percentage of the carbon footprint is attributed to {listed} in the {product}?"
            ),
        },
        QuestionType::MaxMin(direction) => {
            let (extreme, most) = match direction {
                Direction::Max => ("largest", "most"),
                Direction::Min => ("smallest", "least"),
            };
            match variant {
                0 => format!(
                    "Which component has the {extreme} carbon footprint share in the {product}?"
                ),
                _ => format!(
                    "Which component contributes the {most} to the carbon footprint of the {product}?"
                ),
            }
        }
        QuestionType::TopN(n) => match variant {
            0 => format!(
                "What are the top {n} components by carbon footprint share in the {product}?"
            ),
            _ => format!(
                "Which {n} components contribute the most to the carbon footprint of the {product}?"
            ),
        },
        QuestionType::Calculation => match variant {
            0 => format!("What are the carbon footprints of {listed} in the {product}?"),
            1 => format!("How much carbon in kgCO2e is attributed to {listed} in the {product}?"),
            _ => format!("Calculate the carbon footprints of {listed} for the {product}."),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{INTRO, Schema};
    use indexmap::IndexMap;
    use std::collections::HashSet;

    fn record() -> ExtractionRecord {
        ExtractionRecord {
            doc_id: "d".into(),
            product_name: "Zentra K4821A".into(),
            product_type: "laptop".into(),
            total_pcf: 300.0,
            lifecycle_percents: None,
            component_percents: IndexMap::from([
                ("ssd".to_string(), 60.0),
                ("display".to_string(), 40.0),
            ]),
            schema: Schema::DirectComponent,
        }
    }

    fn words(text: &str) -> HashSet<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| w.chars().count() > 1)
            .map(str::to_string)
            .collect()
    }

    #[test]
    fn canonical_calculation_phrasing() {
        let targets = vec!["ssd".to_string(), "display".to_string()];
        assert_eq!(
            question_text(&record(), QuestionType::Calculation, &targets, 0),
            "What are the carbon footprints of ssd and display in the Zentra K4821A laptop?"
        );
    }

    #[test]
    fn lists_join_with_commas_and_and() {
        assert_eq!(join_list(&["a"]), "a");
        assert_eq!(join_list(&["a", "b", "c"]), "a, b and c");
        assert_eq!(target_display("end_of_life"), "end of life");
        assert_eq!(target_display("psu"), "power supply");
    }

    #[test]
    fn template_words_all_occur_in_every_document() {
        // Template wording must not favour any document during retrieval, so
        // every fixed word of every phrasing appears in the shared intro.
        let rec = ExtractionRecord {
            product_name: "Xx".into(),
            product_type: "Yy".into(),
            ..record()
        };
        let intro = words(INTRO);
        let types = [
            (QuestionType::WordMatch, vec!["total".to_string()]),
            (QuestionType::WordMatch, vec!["zz".to_string()]),
            (QuestionType::MaxMin(Direction::Max), vec![]),
            (QuestionType::MaxMin(Direction::Min), vec![]),
            (QuestionType::TopN(3), vec![]),
            (QuestionType::Calculation, vec!["zz".to_string()]),
        ];
        for (qtype, targets) in types {
            for variant in 0..variant_count(qtype) {
                let text = question_text(&rec, qtype, &targets, variant);
                for word in words(&text) {
                    if ["xx", "yy", "zz"].contains(&word.as_str()) {
                        continue;
                    }
                    assert!(intro.contains(&word), "`{word}` from `{text}` missing");
                }
            }
        }
    }
}
