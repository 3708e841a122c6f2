//! Reference selection among retrieved candidates: a deterministic lexical
//! critic, the prompt contract for a remote critic, and training export.

use std::collections::{HashMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::retrieval::{RetrievalResult, tokenize};

/// Default number of candidates shown to the critic.
pub const DEFAULT_CRITIC_K: usize = 5;

/// Weight of product-identifier tokens in the lexical overlap score.
pub const PRODUCT_TOKEN_WEIGHT: f64 = 3.0;

const CRITIC_INSTRUCTION: &str = "You will be provided with a question and several reference texts, each identified by a unique ID. Your goal is to analyze these references and identify which one contains the information needed to answer the question. If a reference text suggests that it provides the necessary information, respond with its corresponding ID. If multiple references apply, respond with a list of their IDs. If none of the references apply, respond with [-1]. Ensure the final output is a list.";

#[derive(Debug, Error, PartialEq)]
pub enum CriticError {
    #[error("the critic needs at least one candidate")]
    NoCandidates,
}

/// What a critic picked among `k` presented candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "ids", rename_all = "snake_case")]
pub enum Selection {
    /// 1-based positions within the presented list, in the critic's order.
    Ids(Vec<usize>),
    NoneApplicable,
    /// The response held no recognizable id list.
    ParseFailure,
}

/// A selection resolved to one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticVerdict {
    pub selection: Selection,
    pub chosen_doc_id: String,
    /// True when the retriever's first document was used because nothing
    /// usable was selected.
    pub fell_back: bool,
}

/// A token that looks like a model identifier: at least five characters
/// mixing letters and digits.
pub fn is_product_token(token: &str) -> bool {
    token.chars().count() >= 5
        && token.chars().any(|c| c.is_alphabetic())
        && token.chars().any(|c| c.is_numeric())
}

/// Weighted overlap between the question's distinct tokens and a
/// candidate's token set.
pub fn overlap_score(question_tokens: &HashSet<String>, candidate: &HashSet<String>) -> f64 {
    question_tokens
        .iter()
        .filter(|t| candidate.contains(*t))
        .map(|t| {
            if is_product_token(t) {
                PRODUCT_TOKEN_WEIGHT
            } else {
                1.0
            }
        })
        .sum()
}

fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Picks the candidate sharing the most weighted tokens with the question;
/// the earlier candidate wins ties. Never returns `NoneApplicable`.
pub fn lexical_critic(
    question: &str,
    candidates: &[(&str, &str)],
) -> Result<Selection, CriticError> {
    if candidates.is_empty() {
        return Err(CriticError::NoCandidates);
    }
    let q: HashSet<String> = tokenize(question).into_iter().collect();
    let scores: Vec<f64> = candidates
        .iter()
        .map(|(_, text)| overlap_score(&q, &tokenize(text).into_iter().collect()))
        .collect();
    Ok(Selection::Ids(vec![argmax_first(&scores) + 1]))
}

/// Lexical critic with each document's token set computed once.
#[derive(Debug, Clone, Default)]
pub struct LexicalCritic {
    token_sets: HashMap<String, HashSet<String>>,
}

impl LexicalCritic {
    pub fn new<'a>(docs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        LexicalCritic {
            token_sets: docs
                .into_iter()
                .map(|(id, text)| (id.to_string(), tokenize(text).into_iter().collect()))
                .collect(),
        }
    }

    /// Same decision as [`lexical_critic`] over the given candidate ids.
    /// Unknown ids score zero.
    pub fn select(&self, question: &str, candidate_ids: &[&str]) -> Result<Selection, CriticError> {
        if candidate_ids.is_empty() {
            return Err(CriticError::NoCandidates);
        }
        let q: HashSet<String> = tokenize(question).into_iter().collect();
        let empty = HashSet::new();
        let scores: Vec<f64> = candidate_ids
            .iter()
            .map(|id| overlap_score(&q, self.token_sets.get(*id).unwrap_or(&empty)))
            .collect();
        Ok(Selection::Ids(vec![argmax_first(&scores) + 1]))
    }
}

static ID_LIST: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\s*(-?\d+(?:\s*,\s*-?\d+)*)\s*,?\s*\]").expect("valid regex"));

/// Reads the first bracketed integer list in a critic completion.
/// `[-1]` means no reference applies; ids outside `1..=k` are dropped, and
/// if none remain the result is `NoneApplicable`.
pub fn parse_critic_response(raw: &str, k: usize) -> Selection {
    let Some(caps) = ID_LIST.captures(raw) else {
        return Selection::ParseFailure;
    };
    let values: Vec<i64> = caps[1]
        .split(',')
        .filter_map(|v| v.trim().parse().ok())
        .collect();
    if values == [-1] {
        return Selection::NoneApplicable;
    }
    let mut ids: Vec<usize> = Vec::new();
    for v in values {
        if v >= 1 && (v as usize) <= k && !ids.contains(&(v as usize)) {
            ids.push(v as usize);
        }
    }
    if ids.is_empty() {
        Selection::NoneApplicable
    } else {
        Selection::Ids(ids)
    }
}

/// Maps a selection onto the retrieval's documents: the first selected id
/// wins; anything else falls back to the first-ranked document.
///
/// # Panics
/// If `retrieval` has no ranked documents.
pub fn resolve_verdict(selection: Selection, retrieval: &RetrievalResult) -> CriticVerdict {
    let first = &retrieval
        .ranked
        .first()
        .expect("retrieval is nonempty")
        .doc_id;
    let picked = match &selection {
        Selection::Ids(ids) => ids
            .first()
            .and_then(|&i| retrieval.ranked.get(i.wrapping_sub(1)))
            .map(|d| d.doc_id.clone()),
        Selection::NoneApplicable | Selection::ParseFailure => None,
    };
    CriticVerdict {
        fell_back: picked.is_none(),
        chosen_doc_id: picked.unwrap_or_else(|| first.clone()),
        selection,
    }
}

/// Neutralizes section markers inside inserted text so that a reference
/// cannot open a new prompt section.
pub(crate) fn sanitize_section_text(text: &str) -> String {
    text.replace("###", "# # #")
}

/// Critic prompt for a question and its candidate references, ending at
/// the output cue.
pub fn build_critic_prompt(question: &str, references: &[&str]) -> String {
    let mut prompt = String::with_capacity(
        CRITIC_INSTRUCTION.len() + references.iter().map(|r| r.len() + 24).sum::<usize>(),
    );
    prompt.push_str(CRITIC_INSTRUCTION);
    prompt.push_str("\n### Question: ");
    prompt.push_str(&sanitize_section_text(question));
    for (i, reference) in references.iter().enumerate() {
        prompt.push_str(&format!("\n### Reference {}: ", i + 1));
        prompt.push_str(&sanitize_section_text(reference));
    }
    prompt.push_str("\n### Output:");
    prompt
}

/// Training completion for a candidate list: the gold document's 1-based
/// position, or `[-1]` when it was not retrieved.
pub fn critic_completion(retrieval: &RetrievalResult, gold_doc_id: &str) -> String {
    match retrieval.rank_of(gold_doc_id) {
        Some(rank) => format!("[{rank}]"),
        None => "[-1]".to_string(),
    }
}
