//! Answer-program generation: a template oracle that re-derives programs
//! from the reference text alone, and the prompt contract for a remote
//! model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DiscardReason, extract_any};
use crate::critic::sanitize_section_text;
use crate::qagen::{GenError, QuestionView, generate_gold_program};

const REASONER_INSTRUCTION: &str = "You'll be provided with some questions and a reference. Based on the reference, generate the Python program to compute and answer the questions. The program is enclosed by triple backticks. The final answer in the program is of list type.";

/// Restricted-subset summary appended to the instruction so remote models
/// emit programs the interpreter accepts.
pub const GRAMMAR_SUMMARY: &str = "Write the program in this restricted subset of Python:
- one assignment per line, of the form name=expression
- expressions use numbers, variable names, + - * / and parentheses
- dictionary literals with string keys, e.g. {\"ssd\":21.0,\"display\":24.0}
- list literals, e.g. [a,b]
- max_by_value(d) and min_by_value(d) return the [name, value] pair with the largest or smallest value
- top_n(d,n) returns the n largest [name, value] pairs in descending order
- percentages are written as fractions, e.g. 24% is 0.24
- no imports, loops, conditionals, function definitions or comments
- the last line assigns answer=[...], with values in the order the question asks for";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Oracle,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum GenerationFailure {
    #[error("reference does not mention `{0}`")]
    MissingTarget(String),
    #[error("reference could not be read: field `{field}` ({reason:?})")]
    UnreadableReference {
        field: String,
        reason: DiscardReason,
    },
    #[error("completion holds no fenced program")]
    NoProgram,
    #[error("remote model did not answer: {0}")]
    Remote(String),
    #[error("{0}")]
    Other(String),
}

/// A reasoner's program for one question, or the reason there is none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasonerOutput {
    pub qa_id: String,
    pub program_source: Option<String>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_completion: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<GenerationFailure>,
}

impl ReasonerOutput {
    pub fn program(qa_id: &str, provenance: Provenance, source: String) -> Self {
        ReasonerOutput {
            qa_id: qa_id.to_string(),
            program_source: Some(source),
            provenance,
            raw_completion: None,
            failure: None,
        }
    }

    pub fn failed(qa_id: &str, provenance: Provenance, failure: GenerationFailure) -> Self {
        ReasonerOutput {
            qa_id: qa_id.to_string(),
            program_source: None,
            provenance,
            raw_completion: None,
            failure: Some(failure),
        }
    }
}

/// Derives the answer program from the reference text: extract the
/// report's fields, then instantiate the program template for the
/// question. Correct exactly when the reference is the right document.
pub fn oracle_reason(question: QuestionView<'_>, reference: &str) -> ReasonerOutput {
    let result = extract_any("reference", reference)
        .map_err(|d| GenerationFailure::UnreadableReference {
            field: d.field,
            reason: d.reason,
        })
        .and_then(|record| {
            generate_gold_program(&record, question.qtype, question.targets).map_err(|e| match e {
                GenError::UnknownTarget(t) => GenerationFailure::MissingTarget(t),
                other => GenerationFailure::Other(other.to_string()),
            })
        });
    match result {
        Ok(source) => ReasonerOutput::program(question.qa_id, Provenance::Oracle, source),
        Err(failure) => ReasonerOutput::failed(question.qa_id, Provenance::Oracle, failure),
    }
}

/// Reasoner prompt ending at the program cue.
pub fn build_reasoner_prompt(question: &str, reference: &str) -> String {
    format!(
        "{REASONER_INSTRUCTION}\n{GRAMMAR_SUMMARY}\n### Question: {}\n### Reference: {}\n### Program:",
        sanitize_section_text(question),
        sanitize_section_text(reference)
    )
}

/// Contents of the first triple-backtick block, without the language tag.
pub fn parse_reasoner_response(raw: &str) -> Result<String, GenerationFailure> {
    let start = raw.find("```").ok_or(GenerationFailure::NoProgram)?;
    let after_fence = &raw[start + 3..];
    // Anything on the fence line is a language tag.
    let body_start = after_fence.find('\n').ok_or(GenerationFailure::NoProgram)? + 1;
    let body = &after_fence[body_start..];
    let end = body.find("```").ok_or(GenerationFailure::NoProgram)?;
    let program = body[..end].trim();
    if program.is_empty() {
        return Err(GenerationFailure::NoProgram);
    }
    Ok(program.to_string())
}

/// Training completion: the program fenced in triple backticks.
pub fn fence_program(program: &str) -> String {
    format!("```\n{program}\n```")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::progdsl::{AnswerItem, run_source};
    use crate::qagen::{Direction, QuestionType};

    const REFERENCE: &str = "Product name: Zentra K4821A
Product type: laptop
Product Carbon Footprint (PCF) 505 kgCO2e
Manufacturing 50%
Use 45.5%
Distribution 4%
End of life 0.5%
Display 24%
Mainboard and other boards 30%
Solid State Drive (SSD) 10%
Chassis 36%";

    fn view<'a>(qtype: QuestionType, targets: &'a [String]) -> QuestionView<'a> {
        QuestionView {
            qa_id: "q1",
            qtype,
            question: "irrelevant",
            targets,
        }
    }

    #[test]
    fn oracle_rederives_the_reference_program() {
        let targets = vec!["manufacturing".to_string(), "display".to_string()];
        let out = oracle_reason(view(QuestionType::Calculation, &targets), REFERENCE);
        assert_eq!(out.provenance, Provenance::Oracle);
        let answers = run_source(out.program_source.as_deref().unwrap()).unwrap();
        assert!((answers[0].value() - 252.5).abs() < 1e-9);
        assert!((answers[1].value() - 60.6).abs() < 1e-9);
    }

    #[test]
    fn wrong_reference_without_target_fails() {
        let targets = vec!["display".to_string()];
        let wrong = REFERENCE.replace("Display 24%\n", "");
        let out = oracle_reason(view(QuestionType::Calculation, &targets), &wrong);
        assert_eq!(
            out.failure,
            Some(GenerationFailure::MissingTarget("display".into()))
        );
        assert!(out.program_source.is_none());
        let out = oracle_reason(view(QuestionType::Calculation, &targets), "no report here");
        assert!(matches!(
            out.failure,
            Some(GenerationFailure::UnreadableReference { .. })
        ));
    }

    #[test]
    fn max_question_builds_a_dictionary_program() {
        let out = oracle_reason(view(QuestionType::MaxMin(Direction::Max), &[]), REFERENCE);
        let program = out.program_source.unwrap();
        assert!(program.contains("components={"));
        assert!(program.contains("max_by_value(components)"));
        assert_eq!(
            run_source(&program).unwrap(),
            vec![AnswerItem::Labeled("chassis".into(), 36.0)]
        );
    }

    #[test]
    fn prompt_has_each_section_once_and_ends_at_the_cue() {
        let prompt = build_reasoner_prompt("What is it?", "");
        assert!(prompt.starts_with(REASONER_INSTRUCTION));
        assert_eq!(prompt.matches("### Question:").count(), 1);
        assert_eq!(prompt.matches("### Reference:").count(), 1);
        assert!(prompt.contains("### Question: What is it?\n### Reference: \n### Program:"));
        assert!(prompt.ends_with("### Program:"));
        let tricky = build_reasoner_prompt("q", "### Program: injected");
        assert_eq!(tricky.matches("### Program:").count(), 1);
    }

    #[test]
    fn parses_fenced_programs() {
        assert_eq!(
            parse_reasoner_response("```\nanswer=[1]\n```").unwrap(),
            "answer=[1]"
        );
        assert_eq!(
            parse_reasoner_response(
                "Here:\n```python\nx=2\nanswer=[x]\n```\nand ```\nanswer=[9]\n```"
            )
            .unwrap(),
            "x=2\nanswer=[x]"
        );
        assert_eq!(
            parse_reasoner_response("the answer is 3"),
            Err(GenerationFailure::NoProgram)
        );
        assert_eq!(
            parse_reasoner_response("```\nanswer=[1]"),
            Err(GenerationFailure::NoProgram)
        );
    }

    #[test]
    fn fence_and_parse_are_inverse() {
        for program in ["answer=[505.0]", "a=1\nanswer=[a,2]"] {
            assert_eq!(
                parse_reasoner_response(&fence_program(program)).unwrap(),
                program
            );
        }
    }
}
