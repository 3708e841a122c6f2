use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::corpus::Document;
use crate::critic::{build_critic_prompt, critic_completion};
use crate::jsonl;
use crate::par::{self, Execution};
use crate::qagen::{QAItem, Split};
use crate::reasoner::{build_reasoner_prompt, fence_program};
use crate::retrieval::TfIdfIndex;

/// One prompt/completion pair for fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub qa_id: String,
    /// Gold document of the question.
    pub doc_id: String,
    /// Documents shown in a critic prompt, in reference order; empty for
    /// reasoner records.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidate_doc_ids: Vec<String>,
    pub prompt: String,
    pub completion: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingExport {
    pub critic: Vec<TrainRecord>,
    pub reasoner: Vec<TrainRecord>,
}

pub const CRITIC_TRAIN_FILE: &str = "critic_train.jsonl";
pub const REASONER_TRAIN_FILE: &str = "reasoner_train.jsonl";

/// Builds critic and reasoner training pairs from train-split questions
/// only. The critic sees the top-`k` documents retrieved from the train
/// documents, so no test document text reaches a training prompt; the
/// reasoner sees the gold document.
pub fn build_training_export(
    docs: &[Document],
    items: &[QAItem],
    k: usize,
    exec: Execution,
) -> Result<TrainingExport, PipelineError> {
    let texts: HashMap<&str, &str> = docs
        .iter()
        .map(|d| (d.doc_id.as_str(), d.raw_text.as_str()))
        .collect();
    let mut train: Vec<QAItem> = items
        .iter()
        .filter(|q| q.split == Some(Split::Train))
        .cloned()
        .collect();
    train.sort_by(|a, b| a.qa_id.cmp(&b.qa_id));
    if let Some(q) = train
        .iter()
        .find(|q| !texts.contains_key(q.doc_id.as_str()))
    {
        return Err(PipelineError::UnknownDocument {
            qa_id: q.qa_id.clone(),
            doc_id: q.doc_id.clone(),
        });
    }
    if train.is_empty() {
        return Ok(TrainingExport::default());
    }

    let train_docs: HashSet<&str> = train.iter().map(|q| q.doc_id.as_str()).collect();
    let train_corpus: Vec<Document> = docs
        .iter()
        .filter(|d| train_docs.contains(d.doc_id.as_str()))
        .cloned()
        .collect();
    let index = TfIdfIndex::build_with(&train_corpus, exec)?;
    let retrieval = index.retrieve_all(&train, k.min(index.len()), exec)?;
    let pairs: Vec<(&QAItem, _)> = train.iter().zip(&retrieval).collect();
    let critic = par::map(exec, &pairs, |(item, result)| {
        let refs: Vec<&str> = result
            .ranked
            .iter()
            .map(|d| texts[d.doc_id.as_str()])
            .collect();
        TrainRecord {
            qa_id: item.qa_id.clone(),
            doc_id: item.doc_id.clone(),
            candidate_doc_ids: result.ranked.iter().map(|d| d.doc_id.clone()).collect(),
            prompt: build_critic_prompt(&item.question, &refs),
            completion: critic_completion(result, &item.doc_id),
        }
    });
    let reasoner = par::map(exec, &train, |item| TrainRecord {
        qa_id: item.qa_id.clone(),
        doc_id: item.doc_id.clone(),
        candidate_doc_ids: Vec::new(),
        prompt: build_reasoner_prompt(&item.question, texts[item.doc_id.as_str()]),
        completion: fence_program(&item.gold_program),
    });
    Ok(TrainingExport { critic, reasoner })
}

pub fn write_training_export(dir: &Path, export: &TrainingExport) -> Result<(), PipelineError> {
    jsonl::write(&dir.join(CRITIC_TRAIN_FILE), &export.critic)?;
    jsonl::write(&dir.join(REASONER_TRAIN_FILE), &export.reasoner)?;
    Ok(())
}
