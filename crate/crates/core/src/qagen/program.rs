use std::collections::HashSet;
use std::fmt::Write as _;

use super::{Direction, GenError, MAX_ARITY, QuestionType};
use crate::corpus::{ExtractionRecord, Schema};
use crate::progdsl::{AnswerItem, AnswerList, top_n_entries};

/// Target name meaning the product's total footprint.
pub const TOTAL_TARGET: &str = "total";

const MANUFACTURING: &str = "manufacturing";

/// Renders a percent as the decimal fraction literal a program assigns,
/// shifting the decimal point textually so that no rounding is introduced:
/// `24` becomes `0.24`, `50` becomes `0.5`, `21.5` becomes `0.215`.
pub fn percent_fraction_literal(percent: f64) -> String {
    let text = format!("{}", percent.abs());
    let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
    let digits = format!("{int_part}{frac_part}");
    let point = int_part.len() as isize - 2;
    let (whole, frac) = if point <= 0 {
        (
            "0".to_string(),
            format!("{}{digits}", "0".repeat((-point) as usize)),
        )
    } else {
        let point = point as usize;
        (digits[..point].to_string(), digits[point..].to_string())
    };
    let whole = whole.trim_start_matches('0');
    let whole = if whole.is_empty() { "0" } else { whole };
    let frac = frac.trim_end_matches('0');
    let frac = if frac.is_empty() { "0" } else { frac };
    let sign = if percent < 0.0 { "-" } else { "" };
    format!("{sign}{whole}.{frac}")
}

fn number_literal(value: f64) -> String {
    format!("{value:?}")
}

fn is_stage(record: &ExtractionRecord, name: &str) -> bool {
    record
        .lifecycle_percents
        .as_ref()
        .is_some_and(|stages| stages.contains_key(name))
}

fn stage_percent(record: &ExtractionRecord, name: &str) -> Option<f64> {
    record
        .lifecycle_percents
        .as_ref()
        .and_then(|stages| stages.get(name).copied())
}

fn check_targets(qtype: QuestionType, targets: &[String]) -> Result<(), GenError> {
    match qtype {
        QuestionType::WordMatch | QuestionType::Calculation => {
            if targets.is_empty() {
                return Err(GenError::NoTargets(qtype));
            }
            if targets.len() > MAX_ARITY {
                return Err(GenError::TooManyTargets {
                    count: targets.len(),
                    max: MAX_ARITY,
                });
            }
        }
        QuestionType::MaxMin(_) | QuestionType::TopN(_) => {}
    }
    Ok(())
}

fn components_dict(record: &ExtractionRecord) -> Result<String, GenError> {
    if record.component_percents.is_empty() {
        return Err(GenError::NoComponents);
    }
    let entries: Vec<String> = record
        .component_percents
        .iter()
        .map(|(name, percent)| format!("\"{name}\":{}", number_literal(*percent)))
        .collect();
    Ok(format!("components={{{}}}", entries.join(",")))
}

/// Builds the gold program for a question about `record`.
///
/// Calculation programs assign the total, then (for lifecycle reports) the
/// manufacturing fraction, then each target's fraction and footprint, and
/// finish with `answer=[...]` in target order. Word-match programs return
/// literal values: the total in kgCO2e for the `total` target and the
/// reported percent for any stage or component. Max/Min and Top-N programs
/// build a component dictionary and call the matching builtin.
pub fn generate_gold_program(
    record: &ExtractionRecord,
    qtype: QuestionType,
    targets: &[String],
) -> Result<String, GenError> {
    check_targets(qtype, targets)?;
    match qtype {
        QuestionType::WordMatch => {
            let values = targets
                .iter()
                .map(|t| word_match_value(record, t).map(number_literal))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(format!("answer=[{}]", values.join(",")))
        }
        QuestionType::MaxMin(direction) => {
            let builtin = match direction {
                Direction::Max => "max_by_value",
                Direction::Min => "min_by_value",
            };
            Ok(format!(
                "{}\nanswer=[{builtin}(components)]",
                components_dict(record)?
            ))
        }
        QuestionType::TopN(n) => Ok(format!(
            "{}\nanswer=top_n(components,{n})",
            components_dict(record)?
        )),
        QuestionType::Calculation => calculation_program(record, targets),
    }
}

fn calculation_program(record: &ExtractionRecord, targets: &[String]) -> Result<String, GenError> {
    for target in targets {
        let known = target == TOTAL_TARGET
            || is_stage(record, target)
            || record.component_percents.contains_key(target);
        if !known {
            return Err(GenError::UnknownTarget(target.clone()));
        }
    }
    let lifecycle = record.schema == Schema::LifecycleBreakdown;
    let needs_manufacturing = targets
        .iter()
        .any(|t| t == MANUFACTURING || (lifecycle && record.component_percents.contains_key(t)));
    let manufacturing = if needs_manufacturing {
        Some(
            record
                .manufacturing_percent()
                .ok_or_else(|| GenError::UnknownTarget(MANUFACTURING.into()))?,
        )
    } else {
        None
    };

    let mut src = String::new();
    let _ = writeln!(src, "total_carbon={}", number_literal(record.total_pcf));
    if let Some(percent) = manufacturing {
        let _ = writeln!(
            src,
            "{MANUFACTURING}_percent={}",
            percent_fraction_literal(percent)
        );
    }
    let mut emitted: HashSet<&str> = HashSet::new();
    let mut answer_vars = Vec::with_capacity(targets.len());
    for target in targets {
        if target == TOTAL_TARGET {
            answer_vars.push("total_carbon".to_string());
            continue;
        }
        let var = format!("{target}_carbon");
        if emitted.insert(target) {
            if target == MANUFACTURING {
                let _ = writeln!(src, "{var}=total_carbon*{MANUFACTURING}_percent");
            } else if let Some(percent) = stage_percent(record, target) {
                let _ = writeln!(
                    src,
                    "{target}_percent={}",
                    percent_fraction_literal(percent)
                );
                let _ = writeln!(src, "{var}=total_carbon*{target}_percent");
            } else {
                let percent = record.component_percents[target.as_str()];
                let _ = writeln!(
                    src,
                    "{target}_percent={}",
                    percent_fraction_literal(percent)
                );
                if lifecycle {
                    let _ = writeln!(
                        src,
                        "{var}=total_carbon*{MANUFACTURING}_percent*{target}_percent"
                    );
                } else {
                    let _ = writeln!(src, "{var}=total_carbon*{target}_percent");
                }
            }
        }
        answer_vars.push(var);
    }
    let _ = write!(src, "answer=[{}]", answer_vars.join(","));
    Ok(src)
}

fn word_match_value(record: &ExtractionRecord, target: &str) -> Result<f64, GenError> {
    if target == TOTAL_TARGET {
        return Ok(record.total_pcf);
    }
    stage_percent(record, target)
        .or_else(|| record.component_percents.get(target).copied())
        .ok_or_else(|| GenError::UnknownTarget(target.to_string()))
}

/// Computes the answers a question asks for directly from the record,
/// without going through a program. Used to check gold programs.
pub fn expected_answers(
    record: &ExtractionRecord,
    qtype: QuestionType,
    targets: &[String],
) -> Result<AnswerList, GenError> {
    check_targets(qtype, targets)?;
    match qtype {
        QuestionType::WordMatch => targets
            .iter()
            .map(|t| word_match_value(record, t).map(AnswerItem::Number))
            .collect(),
        QuestionType::Calculation => {
            let total = record.total_pcf;
            targets
                .iter()
                .map(|target| {
                    if target == TOTAL_TARGET {
                        return Ok(AnswerItem::Number(total));
                    }
                    if let Some(stage) = stage_percent(record, target) {
                        return Ok(AnswerItem::Number(total * (stage / 100.0)));
                    }
                    let component = record
                        .component_percents
                        .get(target.as_str())
                        .ok_or_else(|| GenError::UnknownTarget(target.clone()))?;
                    let value = match record.schema {
                        Schema::LifecycleBreakdown => {
                            let mfg = record
                                .manufacturing_percent()
                                .ok_or_else(|| GenError::UnknownTarget(MANUFACTURING.into()))?;
                            total * (mfg / 100.0) * (component / 100.0)
                        }
                        Schema::DirectComponent => total * (component / 100.0),
                    };
                    Ok(AnswerItem::Number(value))
                })
                .collect()
        }
        QuestionType::MaxMin(direction) => {
            let mut best: Option<(&String, f64)> = None;
            for (name, &value) in &record.component_percents {
                let better = match (best, direction) {
                    (None, _) => true,
                    (Some((_, b)), Direction::Max) => value > b,
                    (Some((_, b)), Direction::Min) => value < b,
                };
                if better {
                    best = Some((name, value));
                }
            }
            let (name, value) = best.ok_or(GenError::NoComponents)?;
            Ok(vec![AnswerItem::Labeled(name.clone(), value)])
        }
        QuestionType::TopN(n) => {
            if record.component_percents.is_empty() {
                return Err(GenError::NoComponents);
            }
            let entries: Vec<(String, f64)> = record
                .component_percents
                .iter()
                .map(|(k, v)| (k.clone(), *v))
                .collect();
            Ok(top_n_entries(&entries, n)
                .into_iter()
                .map(|(k, v)| AnswerItem::Labeled(k, v))
                .collect())
        }
    }
}

/// True when two answer lists agree item by item: equal labels and values
/// within a relative tolerance of 1e-9.
pub(crate) fn answers_agree(a: &AnswerList, b: &AnswerList) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            let (vx, vy) = (x.value(), y.value());
            x.label() == y.label() && (vx - vy).abs() <= 1e-9 * vx.abs().max(vy.abs()).max(1.0)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::progdsl::run_source;
    use indexmap::IndexMap;

    pub(crate) fn laptop_record() -> ExtractionRecord {
        ExtractionRecord {
            doc_id: "doc0001".into(),
            product_name: "Zentra K4821A".into(),
            product_type: "laptop".into(),
            total_pcf: 505.0,
            lifecycle_percents: Some(IndexMap::from([
                ("manufacturing".to_string(), 50.0),
                ("use".to_string(), 45.5),
                ("distribution".to_string(), 4.0),
                ("end_of_life".to_string(), 0.5),
            ])),
            component_percents: IndexMap::from([
                ("display".to_string(), 24.0),
                ("mainboard".to_string(), 30.0),
                ("ssd".to_string(), 10.0),
                ("chassis".to_string(), 36.0),
            ]),
            schema: Schema::LifecycleBreakdown,
        }
    }

    fn targets(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fraction_literals_shift_the_decimal_point() {
        assert_eq!(percent_fraction_literal(24.0), "0.24");
        assert_eq!(percent_fraction_literal(50.0), "0.5");
        assert_eq!(percent_fraction_literal(4.0), "0.04");
        assert_eq!(percent_fraction_literal(100.0), "1.0");
        assert_eq!(percent_fraction_literal(21.5), "0.215");
        assert_eq!(percent_fraction_literal(0.5), "0.005");
        assert_eq!(percent_fraction_literal(0.0), "0.0");
    }

    #[test]
    fn calculation_program_has_the_reference_shape() {
        let program = generate_gold_program(
            &laptop_record(),
            QuestionType::Calculation,
            &targets(&["manufacturing", "display"]),
        )
        .unwrap();
        assert_eq!(
            program,
            "total_carbon=505.0\n\
             manufacturing_percent=0.5\n\
             manufacturing_carbon=total_carbon*manufacturing_percent\n\
             display_percent=0.24\n\
             display_carbon=total_carbon*manufacturing_percent*display_percent\n\
             answer=[manufacturing_carbon,display_carbon]"
        );
        let answers = run_source(&program).unwrap();
        // 505 * 0.5 and 505 * 0.5 * 0.24, computed by hand.
        assert!((answers[0].value() - 252.5).abs() < 1e-9);
        assert!((answers[1].value() - 60.6).abs() < 1e-9);
    }

    #[test]
    fn total_only_calculation_returns_the_total() {
        let program = generate_gold_program(
            &laptop_record(),
            QuestionType::Calculation,
            &targets(&["total"]),
        )
        .unwrap();
        assert_eq!(program, "total_carbon=505.0\nanswer=[total_carbon]");
    }

    #[test]
    fn direct_schema_skips_manufacturing() {
        let mut record = laptop_record();
        record.schema = Schema::DirectComponent;
        record.lifecycle_percents = None;
        let program =
            generate_gold_program(&record, QuestionType::Calculation, &targets(&["ssd"])).unwrap();
        assert!(!program.contains("manufacturing"));
        let answers = run_source(&program).unwrap();
        assert!((answers[0].value() - 50.5).abs() < 1e-9);
    }

    #[test]
    fn word_match_total_is_a_literal() {
        let program = generate_gold_program(
            &laptop_record(),
            QuestionType::WordMatch,
            &targets(&["total"]),
        )
        .unwrap();
        assert_eq!(program, "answer=[505.0]");
        let program = generate_gold_program(
            &laptop_record(),
            QuestionType::WordMatch,
            &targets(&["ssd", "use"]),
        )
        .unwrap();
        assert_eq!(program, "answer=[10.0,45.5]");
    }

    #[test]
    fn max_min_and_top_n_return_labeled_pairs() {
        let record = laptop_record();
        let run = |qtype| run_source(&generate_gold_program(&record, qtype, &[]).unwrap()).unwrap();
        assert_eq!(
            run(QuestionType::MaxMin(Direction::Max)),
            vec![AnswerItem::Labeled("chassis".into(), 36.0)]
        );
        assert_eq!(
            run(QuestionType::MaxMin(Direction::Min)),
            vec![AnswerItem::Labeled("ssd".into(), 10.0)]
        );
        let top3 = run(QuestionType::TopN(3));
        let labels: Vec<_> = top3.iter().map(|a| a.label().unwrap()).collect();
        assert_eq!(labels, ["chassis", "mainboard", "display"]);
    }

    #[test]
    fn argmax_over_three_components() {
        let mut record = laptop_record();
        record.component_percents = IndexMap::from([
            ("display".to_string(), 24.0),
            ("mainboard".to_string(), 30.0),
            ("ssd".to_string(), 10.0),
        ]);
        let program =
            generate_gold_program(&record, QuestionType::MaxMin(Direction::Max), &[]).unwrap();
        assert_eq!(
            run_source(&program).unwrap(),
            vec![AnswerItem::Labeled("mainboard".into(), 30.0)]
        );
    }

    #[test]
    fn unknown_target_names_the_component() {
        let err = generate_gold_program(
            &laptop_record(),
            QuestionType::Calculation,
            &targets(&["gpu"]),
        )
        .unwrap_err();
        assert_eq!(err, GenError::UnknownTarget("gpu".into()));
        assert!(err.to_string().contains("gpu"));
    }

    #[test]
    fn arity_is_capped() {
        let err = generate_gold_program(
            &laptop_record(),
            QuestionType::WordMatch,
            &targets(&["ssd", "display", "chassis", "mainboard", "use", "total"]),
        )
        .unwrap_err();
        assert!(matches!(err, GenError::TooManyTargets { count: 6, .. }));
    }

    #[test]
    fn programs_agree_with_direct_computation() {
        let record = laptop_record();
        let cases: Vec<(QuestionType, Vec<String>)> = vec![
            (
                QuestionType::Calculation,
                targets(&["use", "ssd", "chassis"]),
            ),
            (
                QuestionType::Calculation,
                targets(&["distribution", "end_of_life"]),
            ),
            (
                QuestionType::WordMatch,
                targets(&["manufacturing", "mainboard"]),
            ),
            (QuestionType::TopN(5), vec![]),
        ];
        for (qtype, t) in cases {
            let program = generate_gold_program(&record, qtype, &t).unwrap();
            let executed = run_source(&program).unwrap();
            let expected = expected_answers(&record, qtype, &t).unwrap();
            assert!(answers_agree(&executed, &expected), "{program}");
        }
    }
}
