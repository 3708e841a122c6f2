//! The restricted answer-program language.
//!
//! Programs are newline-separated assignments over numbers, identifiers,
//! list literals, string-keyed dict literals and three builtins
//! (`max_by_value`, `min_by_value`, `top_n`). The language is a syntactic
//! subset of Python assignments so template programs such as
//!
//! ```text
//! total_carbon=505.0
//! manufacturing_percent=0.5
//! manufacturing_carbon=total_carbon*manufacturing_percent
//! display_percent=0.24
//! display_carbon=total_carbon*manufacturing_percent*display_percent
//! answer=[manufacturing_carbon,display_carbon]
//! ```
//!
//! parse unchanged. There are no loops, calls outside the builtin set,
//! or I/O, and evaluation is bounded by [`STEP_LIMIT`].

mod ast;
mod interp;
mod lexer;
mod parser;

pub use ast::{BinOp, Builtin, Expr, Program, Stmt};
pub use interp::{Value, execute, top_n, top_n_entries};
pub use parser::parse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of evaluated AST nodes per program run.
pub const STEP_LIMIT: usize = 10_000;

/// Variable a program must bind to its final answer list.
pub const ANSWER_VAR: &str = "answer";

/// One element of an answer list.
///
/// Serializes as a bare JSON number or as a `[name, number]` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnswerItem {
    Number(f64),
    Labeled(String, f64),
}

impl AnswerItem {
    pub fn value(&self) -> f64 {
        match self {
            AnswerItem::Number(v) => *v,
            AnswerItem::Labeled(_, v) => *v,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            AnswerItem::Number(_) => None,
            AnswerItem::Labeled(name, _) => Some(name),
        }
    }
}

/// Ordered answers; position is semantic.
pub type AnswerList = Vec<AnswerItem>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undefined variable `{0}`")]
    UndefinedVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("program never assigns `answer`")]
    MissingAnswer,
    #[error("type error: {0}")]
    TypeError(String),
    #[error("step limit of {STEP_LIMIT} evaluated nodes exceeded")]
    StepLimitExceeded,
}

/// Parses and executes `source` in one go.
pub fn run_source(source: &str) -> Result<AnswerList, ExecError> {
    let program = parse(source)?;
    execute(&program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn answer_items_serialize_as_numbers_or_pairs() {
        let answers = vec![
            AnswerItem::Number(252.5),
            AnswerItem::Labeled("mainboard".into(), 30.0),
        ];
        let json = serde_json::to_string(&answers).unwrap();
        assert_eq!(json, r#"[252.5,["mainboard",30.0]]"#);
        let back: AnswerList = serde_json::from_str(&json).unwrap();
        assert_eq!(back, answers);
    }

    #[test]
    fn integer_json_numbers_deserialize_as_numbers() {
        let back: AnswerList = serde_json::from_str(r#"[3, ["a", 2]]"#).unwrap();
        assert_eq!(
            back,
            vec![
                AnswerItem::Number(3.0),
                AnswerItem::Labeled("a".into(), 2.0)
            ]
        );
    }
}
