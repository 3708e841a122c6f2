use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig, RunOutcome, run_pipeline};
use crate::evalkit::MetricRow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub configuration: String,
    pub overall: MetricRow,
    /// Fraction of questions whose reasoner saw the gold document.
    pub selection_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub outcomes: Vec<RunOutcome>,
}

/// Runs each configuration in order. All of them must evaluate the same
/// questions, otherwise their rows would not be comparable.
pub fn run_ablation(configs: &[RunConfig]) -> Result<AblationResult, PipelineError> {
    if configs.is_empty() {
        return Err(PipelineError::Config(
            "ablation needs at least one configuration".into(),
        ));
    }
    let mut outcomes: Vec<RunOutcome> = Vec::with_capacity(configs.len());
    for config in configs {
        let outcome = run_pipeline(config)?;
        if let Some(first) = outcomes.first()
            && first.dataset_fingerprint != outcome.dataset_fingerprint
        {
            return Err(PipelineError::DatasetMismatch {
                first: first.name.clone(),
                other: outcome.name.clone(),
            });
        }
        outcomes.push(outcome);
    }
    let rows = outcomes
        .iter()
        .map(|o| AblationRow {
            configuration: o.name.clone(),
            overall: o.report.overall.clone(),
            selection_accuracy: o.report.stages.as_ref().map(|s| s.selection_accuracy),
        })
        .collect();
    Ok(AblationResult { rows, outcomes })
}

/// One line per configuration with RMSE, MAE and EM (%), in input order.
pub fn render_ablation_table(rows: &[AblationRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.configuration.len())
        .chain(["Configuration".len()])
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} {:>10} {:>10} {:>8}",
        "Configuration", "RMSE", "MAE", "EM"
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{:<width$} {:>10.2} {:>10.2} {:>8.2}",
            row.configuration, row.overall.rmse, row.overall.mae, row.overall.em
        );
    }
    out
}
