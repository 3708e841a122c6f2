//! Scoring: exact match, RMSE and MAE, with per-type and per-arity
//! breakdowns.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::progdsl::{AnswerItem, AnswerList};
use crate::qagen::{QAItem, QuestionFamily};

/// Decimal places both sides are rounded to before exact-match comparison.
pub const DEFAULT_EM_DECIMALS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The completion or program text could not be parsed.
    ParseFailure,
    /// The program parsed but failed to run.
    ExecFailure,
    /// No program was produced.
    GenerationFailure,
    /// No program could be produced because the chosen reference was not
    /// the question's document.
    WrongDoc,
}

impl FailureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureKind::ParseFailure => "parse_failure",
            FailureKind::ExecFailure => "exec_failure",
            FailureKind::GenerationFailure => "generation_failure",
            FailureKind::WrongDoc => "wrong_doc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub qa_id: String,
    /// Empty whenever `failure` is set.
    pub answers: AnswerList,
    #[serde(default)]
    pub failure: Option<FailureKind>,
}

impl Prediction {
    pub fn answered(qa_id: impl Into<String>, answers: AnswerList) -> Self {
        Prediction {
            qa_id: qa_id.into(),
            answers,
            failure: None,
        }
    }

    pub fn failed(qa_id: impl Into<String>, failure: FailureKind) -> Self {
        Prediction {
            qa_id: qa_id.into(),
            answers: Vec::new(),
            failure: Some(failure),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction for unknown question `{0}`")]
    UnknownQaId(String),
    #[error("duplicate prediction for `{0}`")]
    DuplicatePrediction(String),
    #[error("{} questions have no prediction: {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),
}

fn scaled(value: f64, decimals: u32) -> f64 {
    (value * 10f64.powi(decimals as i32)).round()
}

fn labels_equal(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// Exact match at [`DEFAULT_EM_DECIMALS`].
pub fn exact_match(pred: &AnswerList, gold: &AnswerList) -> bool {
    exact_match_with(pred, gold, DEFAULT_EM_DECIMALS)
}

/// Same length, and position by position equal values after rounding to
/// `decimals` places; labeled items also need equal labels, compared
/// case-insensitively after trimming.
pub fn exact_match_with(pred: &AnswerList, gold: &AnswerList, decimals: u32) -> bool {
    pred.len() == gold.len()
        && pred.iter().zip(gold).all(|(p, g)| {
            let labels_ok = match (p, g) {
                (AnswerItem::Number(_), AnswerItem::Number(_)) => true,
                (AnswerItem::Labeled(a, _), AnswerItem::Labeled(b, _)) => labels_equal(a, b),
                _ => false,
            };
            labels_ok && scaled(p.value(), decimals) == scaled(g.value(), decimals)
        })
}

/// Absolute error per gold value: positional pairing, a missing prediction
/// counts as zero, extra predictions are ignored.
pub fn error_terms(pred: &AnswerList, gold: &AnswerList) -> Vec<f64> {
    gold.iter()
        .enumerate()
        .map(|(i, g)| {
            let p = pred.get(i).map_or(0.0, AnswerItem::value);
            (p - g.value()).abs()
        })
        .collect()
}

/// `(rmse, mae)` over a flat list of errors (signs are ignored); zeros when
/// empty.
pub fn rmse_mae_of(errors: &[f64]) -> (f64, f64) {
    if errors.is_empty() {
        return (0.0, 0.0);
    }
    let n = errors.len() as f64;
    let mse = errors.iter().map(|e| e * e).sum::<f64>() / n;
    let mae = errors.iter().map(|e| e.abs()).sum::<f64>() / n;
    (mse.sqrt(), mae)
}

fn index_golds(golds: &[QAItem]) -> HashMap<&str, &QAItem> {
    golds.iter().map(|q| (q.qa_id.as_str(), q)).collect()
}

/// RMSE and MAE over all error terms of all predictions.
pub fn rmse_mae(preds: &[Prediction], golds: &[QAItem]) -> Result<(f64, f64), EvalError> {
    let by_id = index_golds(golds);
    let mut errors = Vec::new();
    for pred in preds {
        let gold = by_id
            .get(pred.qa_id.as_str())
            .ok_or_else(|| EvalError::UnknownQaId(pred.qa_id.clone()))?;
        errors.extend(error_terms(&pred.answers, &gold.gold_answers));
    }
    Ok(rmse_mae_of(&errors))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub label: String,
    pub questions: usize,
    pub rmse: f64,
    pub mae: f64,
    /// Exact match in percent, rounded to two decimals.
    pub em: f64,
}

#[derive(Default)]
struct Accumulator {
    questions: usize,
    matches: usize,
    errors: Vec<f64>,
}

impl Accumulator {
    fn add(&mut self, matched: bool, errors: &[f64]) {
        self.questions += 1;
        self.matches += matched as usize;
        self.errors.extend_from_slice(errors);
    }

    fn row(&self, label: impl Into<String>) -> MetricRow {
        let (rmse, mae) = rmse_mae_of(&self.errors);
        let em = if self.questions == 0 {
            0.0
        } else {
            (self.matches as f64 * 10_000.0 / self.questions as f64).round() / 100.0
        };
        MetricRow {
            label: label.into(),
            questions: self.questions,
            rmse,
            mae,
            em,
        }
    }
}

/// Retrieval and critic statistics attached to a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    /// Candidates passed from the retriever to the critic.
    pub k: usize,
    /// Hit rate of the (possibly perturbed) ranking at several cutoffs.
    pub hit_at: BTreeMap<usize, f64>,
    /// Fraction of questions where the first-ranked document is gold.
    pub rank1_accuracy: f64,
    /// Fraction of questions where the reference handed to the reasoner
    /// is gold.
    pub selection_accuracy: f64,
    /// Questions where the critic's output fell back to rank 1.
    pub critic_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: MetricRow,
    pub by_type: Vec<MetricRow>,
    pub by_arity: Vec<MetricRow>,
    pub failures: BTreeMap<FailureKind, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<StageStats>,
}

/// Scores one prediction per gold question.
pub fn build_report(
    preds: &[Prediction],
    golds: &[QAItem],
    stages: Option<StageStats>,
) -> Result<EvalReport, EvalError> {
    let by_id = index_golds(golds);
    let mut seen = HashSet::new();
    let mut overall = Accumulator::default();
    let mut by_type: BTreeMap<QuestionFamily, Accumulator> = BTreeMap::new();
    let mut by_arity: BTreeMap<usize, Accumulator> = BTreeMap::new();
    let mut failures = BTreeMap::new();

    for pred in preds {
        let gold = by_id
            .get(pred.qa_id.as_str())
            .ok_or_else(|| EvalError::UnknownQaId(pred.qa_id.clone()))?;
        if !seen.insert(pred.qa_id.as_str()) {
            return Err(EvalError::DuplicatePrediction(pred.qa_id.clone()));
        }
        let matched = exact_match(&pred.answers, &gold.gold_answers);
        let errors = error_terms(&pred.answers, &gold.gold_answers);
        overall.add(matched, &errors);
        by_type
            .entry(gold.qtype.family())
            .or_default()
            .add(matched, &errors);
        by_arity
            .entry(gold.gold_answers.len())
            .or_default()
            .add(matched, &errors);
        if let Some(kind) = pred.failure {
            *failures.entry(kind).or_insert(0) += 1;
        }
    }

    let mut missing: Vec<String> = golds
        .iter()
        .filter(|g| !seen.contains(g.qa_id.as_str()))
        .map(|g| g.qa_id.clone())
        .collect();
    if !missing.is_empty() {
        missing.sort();
        return Err(EvalError::MissingPredictions(missing));
    }

    Ok(EvalReport {
        overall: overall.row("Overall"),
        by_type: by_type
            .iter()
            .map(|(family, acc)| acc.row(family.label()))
            .collect(),
        by_arity: by_arity
            .iter()
            .map(|(arity, acc)| acc.row(arity.to_string()))
            .collect(),
        failures,
        stages,
    })
}

fn metric_table(out: &mut String, first_header: &str, rows: &[MetricRow]) {
    let _ = writeln!(
        out,
        "{first_header:<14} {:>10} {:>10} {:>10} {:>8}",
        "#Question", "RMSE", "MAE", "EM"
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{:<14} {:>10} {:>10.2} {:>10.2} {:>8.2}",
            row.label, row.questions, row.rmse, row.mae, row.em
        );
    }
}

/// Plain-text rendering: overall metrics, per-type and per-answer-count
/// tables, failures and stage statistics.
pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    metric_table(&mut out, "", std::slice::from_ref(&report.overall));
    out.push('\n');
    metric_table(&mut out, "Type", &report.by_type);
    out.push('\n');
    metric_table(&mut out, "#Answer", &report.by_arity);
    out.push('\n');
    if report.failures.is_empty() {
        out.push_str("Failures: none\n");
    } else {
        out.push_str("Failures:\n");
        for (kind, count) in &report.failures {
            let _ = writeln!(out, "  {:<20} {count}", kind.as_str());
        }
    }
    if let Some(stages) = &report.stages {
        let _ = writeln!(out, "\nStages (k = {}):", stages.k);
        for (k, rate) in &stages.hit_at {
            let _ = writeln!(out, "  hit@{k:<4} {:>8.2}%", rate * 100.0);
        }
        let _ = writeln!(
            out,
            "  rank-1 gold        {:>8.2}%",
            stages.rank1_accuracy * 100.0
        );
        let _ = writeln!(
            out,
            "  selected gold      {:>8.2}%",
            stages.selection_accuracy * 100.0
        );
        let _ = writeln!(out, "  critic fallbacks   {:>8}", stages.critic_fallbacks);
    }
    out
}
