//! End-to-end runs: corpus, questions, retrieval, critic, reasoner,
//! execution and scoring, with every stage's output kept for inspection.

mod ablate;
mod config;
mod export;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::evalkit::EvalError;
use crate::jsonl::JsonlError;
use crate::llmgate::LlmError;
use crate::qagen::{DatasetError, GenError};
use crate::retrieval::RetrievalError;

pub use ablate::{AblationResult, AblationRow, render_ablation_table, run_ablation};
pub use config::{CriticMode, ReasonerMode, RetrieverMode, RunConfig};
pub use export::{
    CRITIC_TRAIN_FILE, REASONER_TRAIN_FILE, TrainRecord, TrainingExport, build_training_export,
    write_training_export,
};
pub use run::{
    CriticRecord, RunOutcome, dataset_fingerprint, load_documents, prepare_dataset, run_pipeline,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("the test split holds no questions")]
    NoTestQuestions,
    #[error("configurations evaluate different questions: `{first}` and `{other}`")]
    DatasetMismatch { first: String, other: String },
    #[error("question `{qa_id}` refers to unknown document `{doc_id}`")]
    UnknownDocument { qa_id: String, doc_id: String },
}

impl PipelineError {
    /// Errors caused by the configuration rather than by the data.
    pub fn is_config_error(&self) -> bool {
        matches!(self, PipelineError::Config(_) | PipelineError::Llm(_))
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> PipelineError {
        let path = path.into();
        move |source| PipelineError::Io { path, source }
    }
}
