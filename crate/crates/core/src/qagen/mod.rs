//! Question, gold-program and split generation plus record validation.

mod generate;
mod io;
mod program;
mod split;
mod templates;
mod validate;

pub use generate::{GenConfig, TypeWeights, generate_questions};
pub use io::{DatasetError, read_dataset, write_dataset, write_validation_csv};
pub use program::{
    TOTAL_TARGET, expected_answers, generate_gold_program, percent_fraction_literal,
};
pub use split::{split_dataset, split_documents};
pub use templates::question_text;
pub use validate::{
    CheckStatus, Overall, SUM_HIGH, SUM_LOW, ValidationEntry, ValidationReport, validate_records,
};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::progdsl::{AnswerList, ExecError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuestionType {
    /// Values stated literally in the report.
    WordMatch,
    /// The component with the largest or smallest share.
    MaxMin(Direction),
    /// The `n` largest components, `n` in {3, 5}.
    TopN(usize),
    /// Footprints derived by multiplying the total with percentages.
    Calculation,
}

/// Reporting family of a question type (rows of the per-type table).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuestionFamily {
    #[serde(rename = "Word Match")]
    WordMatch,
    #[serde(rename = "Max/Min")]
    MaxMin,
    #[serde(rename = "Top 3/5")]
    TopN,
    #[serde(rename = "Calculation")]
    Calculation,
}

impl QuestionFamily {
    pub const ALL: [QuestionFamily; 4] = [
        QuestionFamily::WordMatch,
        QuestionFamily::MaxMin,
        QuestionFamily::TopN,
        QuestionFamily::Calculation,
    ];

    pub fn label(self) -> &'static str {
        match self {
            QuestionFamily::WordMatch => "Word Match",
            QuestionFamily::MaxMin => "Max/Min",
            QuestionFamily::TopN => "Top 3/5",
            QuestionFamily::Calculation => "Calculation",
        }
    }
}

impl QuestionType {
    pub fn family(self) -> QuestionFamily {
        match self {
            QuestionType::WordMatch => QuestionFamily::WordMatch,
            QuestionType::MaxMin(_) => QuestionFamily::MaxMin,
            QuestionType::TopN(_) => QuestionFamily::TopN,
            QuestionType::Calculation => QuestionFamily::Calculation,
        }
    }

    pub fn as_str(self) -> String {
        match self {
            QuestionType::WordMatch => "word_match".into(),
            QuestionType::MaxMin(Direction::Max) => "max".into(),
            QuestionType::MaxMin(Direction::Min) => "min".into(),
            QuestionType::TopN(n) => format!("top{n}"),
            QuestionType::Calculation => "calculation".into(),
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str())
    }
}

impl FromStr for QuestionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "word_match" => Ok(QuestionType::WordMatch),
            "max" => Ok(QuestionType::MaxMin(Direction::Max)),
            "min" => Ok(QuestionType::MaxMin(Direction::Min)),
            "top3" => Ok(QuestionType::TopN(3)),
            "top5" => Ok(QuestionType::TopN(5)),
            "calculation" => Ok(QuestionType::Calculation),
            other => Err(format!("unknown question type `{other}`")),
        }
    }
}

impl Serialize for QuestionType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.as_str())
    }
}

impl<'de> Deserialize<'de> for QuestionType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One generated question with its gold program and answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAItem {
    pub qa_id: String,
    /// Gold reference document.
    pub doc_id: String,
    pub qtype: QuestionType,
    pub question: String,
    /// Component or stage names in question order; empty for Max/Min and Top-N.
    pub targets: Vec<String>,
    pub gold_program: String,
    pub gold_answers: AnswerList,
    /// Assigned by [`split_dataset`]; `None` before splitting.
    pub split: Option<Split>,
}

/// The parts of a question visible to a reasoner: everything but the gold
/// program, gold answers and gold document.
#[derive(Debug, Clone, Copy)]
pub struct QuestionView<'a> {
    pub qa_id: &'a str,
    pub qtype: QuestionType,
    pub question: &'a str,
    pub targets: &'a [String],
}

impl QAItem {
    pub fn view(&self) -> QuestionView<'_> {
        QuestionView {
            qa_id: &self.qa_id,
            qtype: self.qtype,
            question: &self.question,
            targets: &self.targets,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("target `{0}` is not present in the record")]
    UnknownTarget(String),
    #[error("question type {0} needs at least one target")]
    NoTargets(QuestionType),
    #[error("{count} targets exceed the maximum of {max}")]
    TooManyTargets { count: usize, max: usize },
    #[error("record has no components")]
    NoComponents,
    #[error("gold program failed to execute: {0}")]
    Exec(#[from] ExecError),
    #[error("gold program for {qa_id} disagrees with direct computation")]
    RoundTrip { qa_id: String },
    #[error("no records to generate questions from")]
    NoRecords,
    #[error("split ratio must lie strictly between 0 and 1, got {0}")]
    BadRatio(f64),
}

/// Maximum number of answers a generated question asks for.
pub const MAX_ARITY: usize = 5;
