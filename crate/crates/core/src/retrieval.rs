//! TF-IDF document index, cosine top-k retrieval and hit@k.
//!
//! Weighting follows the common vectorizer defaults: raw term counts,
//! smoothed `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, and L2-normalized
//! document and query vectors.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::par::{self, Execution};
use crate::qagen::QAItem;

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocId(String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no gold document known for question `{0}`")]
    UnknownQaId(String),
    #[error("no retrieval results to score")]
    NoResults,
    #[error("index format version {found} is not supported (expected {INDEX_FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Lowercases, splits on anything that is not alphanumeric and drops
/// single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().nth(1).is_some())
        .map(str::to_string)
        .collect()
}

/// Sparse vector as `(term index, weight)` pairs sorted by term index.
pub type SparseVector = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdfIndex {
    pub version: u32,
    /// Term to column index; columns are assigned in sorted term order.
    pub vocabulary: BTreeMap<String, u32>,
    pub idf: Vec<f64>,
    /// Sorted by doc_id; the position doubles as the tie-break order.
    pub doc_ids: Vec<String>,
    pub doc_vectors: Vec<SparseVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Ranked candidates for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub qa_id: String,
    pub ranked: Vec<ScoredDoc>,
    /// Set when no question term is in the vocabulary: all scores are zero
    /// and the ranking is plain doc_id order.
    #[serde(default)]
    pub no_query_terms: bool,
    /// Gold document, carried along when known so results can be scored
    /// on their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_doc_id: Option<String>,
}

impl RetrievalResult {
    /// 1-based rank of `doc_id`, if present.
    pub fn rank_of(&self, doc_id: &str) -> Option<usize> {
        self.ranked
            .iter()
            .position(|d| d.doc_id == doc_id)
            .map(|p| p + 1)
    }
}

fn term_counts(text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for token in tokenize(text) {
        *counts.entry(token).or_insert(0) += 1;
    }
    counts
}

fn normalize(vector: &mut SparseVector) {
    let norm = vector.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, w) in vector.iter_mut() {
            *w /= norm;
        }
    }
}

/// Dot product of two sorted sparse vectors.
fn sparse_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let (mut i, mut j, mut sum) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                sum += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    sum
}

impl TfIdfIndex {
    /// Fits vocabulary and idf on `docs` and stores their vectors.
    pub fn build(docs: &[Document]) -> Result<Self, RetrievalError> {
        Self::build_with(docs, Execution::default())
    }

    pub fn build_with(docs: &[Document], exec: Execution) -> Result<Self, RetrievalError> {
        if docs.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let mut order: Vec<&Document> = docs.iter().collect();
        order.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if let Some(pair) = order.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
            return Err(RetrievalError::DuplicateDocId(pair[0].doc_id.clone()));
        }

        let counts: Vec<BTreeMap<String, u32>> =
            par::map(exec, &order, |d| term_counts(&d.raw_text));
        let mut df: BTreeMap<&str, u32> = BTreeMap::new();
        for doc in &counts {
            for term in doc.keys() {
                *df.entry(term.as_str()).or_insert(0) += 1;
            }
        }
        let n = order.len() as f64;
        let vocabulary: BTreeMap<String, u32> = df
            .keys()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i as u32))
            .collect();
        let idf: Vec<f64> = df
            .values()
            .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
            .collect();

        let doc_vectors = par::map(exec, &counts, |doc| {
            // BTreeMap iteration is sorted, and column indices follow term
            // order, so the vector comes out sorted.
            let mut vector: SparseVector = doc
                .iter()
                .map(|(term, &tf)| {
                    let col = vocabulary[term];
                    (col, tf as f64 * idf[col as usize])
                })
                .collect();
            normalize(&mut vector);
            vector
        });

        Ok(TfIdfIndex {
            version: INDEX_FORMAT_VERSION,
            vocabulary,
            idf,
            doc_ids: order.iter().map(|d| d.doc_id.clone()).collect(),
            doc_vectors,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    /// Vectorizes text with the fitted vocabulary and idf; unknown terms
    /// are dropped.
    pub fn vectorize(&self, text: &str) -> SparseVector {
        let mut vector: SparseVector = term_counts(text)
            .into_iter()
            .filter_map(|(term, tf)| {
                self.vocabulary
                    .get(&term)
                    .map(|&col| (col, tf as f64 * self.idf[col as usize]))
            })
            .collect();
        vector.sort_by_key(|(col, _)| *col);
        normalize(&mut vector);
        vector
    }

    /// Cosine similarity of `text` against every document, in index order.
    pub fn scores(&self, text: &str) -> (Vec<f64>, bool) {
        let query = self.vectorize(text);
        let scores = self
            .doc_vectors
            .iter()
            .map(|doc| sparse_dot(&query, doc).clamp(0.0, 1.0))
            .collect();
        (scores, query.is_empty())
    }

    /// Top-`k` documents for `question`, ties broken by doc_id.
    pub fn retrieve_topk(
        &self,
        qa_id: &str,
        question: &str,
        k: usize,
    ) -> Result<RetrievalResult, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::ZeroK);
        }
        let (scores, no_query_terms) = self.scores(question);
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // Stable sort keeps doc_id order among equal scores.
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let ranked = order
            .into_iter()
            .take(k)
            .map(|i| ScoredDoc {
                doc_id: self.doc_ids[i].clone(),
                score: scores[i],
            })
            .collect();
        Ok(RetrievalResult {
            qa_id: qa_id.to_string(),
            ranked,
            no_query_terms,
            gold_doc_id: None,
        })
    }

    /// Retrieves for every question, recording each one's gold document.
    pub fn retrieve_all(
        &self,
        items: &[QAItem],
        k: usize,
        exec: Execution,
    ) -> Result<Vec<RetrievalResult>, RetrievalError> {
        par::try_map(exec, items, |item| {
            let mut result = self.retrieve_topk(&item.qa_id, &item.question, k)?;
            result.gold_doc_id = Some(item.doc_id.clone());
            Ok(result)
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), RetrievalError> {
        let json = serde_json::to_string(self).map_err(|source| RetrievalError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        fs::write(path, json).map_err(|source| RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RetrievalError> {
        let text = fs::read_to_string(path).map_err(|source| RetrievalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let index: TfIdfIndex =
            serde_json::from_str(&text).map_err(|source| RetrievalError::Json {
                path: path.to_path_buf(),
                source,
            })?;
        if index.version != INDEX_FORMAT_VERSION {
            return Err(RetrievalError::UnsupportedVersion {
                found: index.version,
            });
        }
        Ok(index)
    }
}

/// Fraction of results whose gold document is among the first `k`.
///
/// `gold` maps qa_id to doc_id; results fall back to their own
/// `gold_doc_id` when the map has no entry.
pub fn hit_rate(
    results: &[RetrievalResult],
    gold: &HashMap<String, String>,
    k: usize,
) -> Result<f64, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if results.is_empty() {
        return Err(RetrievalError::NoResults);
    }
    let mut hits = 0usize;
    for result in results {
        let gold_doc = gold
            .get(&result.qa_id)
            .or(result.gold_doc_id.as_ref())
            .ok_or_else(|| RetrievalError::UnknownQaId(result.qa_id.clone()))?;
        if result.ranked.iter().take(k).any(|d| &d.doc_id == gold_doc) {
            hits += 1;
        }
    }
    Ok(hits as f64 / results.len() as f64)
}

/// `hit_rate` at each of `ks`.
pub fn hit_curve(
    results: &[RetrievalResult],
    gold: &HashMap<String, String>,
    ks: &[usize],
) -> Result<Vec<(usize, f64)>, RetrievalError> {
    ks.iter()
        .map(|&k| hit_rate(results, gold, k).map(|rate| (k, rate)))
        .collect()
}

/// Plain-text table of hit rates in percent, one row per k.
pub fn render_hit_table(curve: &[(usize, f64)]) -> String {
    let mut out = String::from("k     hit rate (%)\n");
    for (k, rate) in curve {
        out.push_str(&format!("{k:<5} {:>12.2}\n", rate * 100.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CompanyProfile;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, CompanyProfile::Direct, text, 1)
    }

    fn result(qa: &str, ranked: &[&str]) -> RetrievalResult {
        RetrievalResult {
            qa_id: qa.into(),
            ranked: ranked
                .iter()
                .map(|d| ScoredDoc {
                    doc_id: d.to_string(),
                    score: 0.5,
                })
                .collect(),
            no_query_terms: false,
            gold_doc_id: None,
        }
    }

    #[test]
    fn tokenizer_drops_short_tokens_and_punctuation() {
        assert_eq!(
            tokenize("SSD: 21.5% of a Zentra-K4821A"),
            vec!["ssd", "21", "of", "zentra", "k4821a"]
        );
    }

    #[test]
    fn term_in_every_document_has_unit_idf() {
        let index =
            TfIdfIndex::build(&[doc("a", "carbon ssd"), doc("b", "carbon chassis")]).unwrap();
        let col = index.vocabulary["carbon"] as usize;
        assert_eq!(index.idf[col], 1.0);
        let col = index.vocabulary["ssd"] as usize;
        assert!((index.idf[col] - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn repeated_terms_weigh_more() {
        let index = TfIdfIndex::build(&[doc("a", "ssd ssd display"), doc("b", "chassis")]).unwrap();
        let weights: HashMap<u32, f64> = index.doc_vectors[0].iter().copied().collect();
        let ssd = weights[&index.vocabulary["ssd"]];
        let display = weights[&index.vocabulary["display"]];
        // Both terms share idf ln(3/2)+1, so the tf ratio carries through.
        assert!((ssd / display - 2.0).abs() < 1e-12);
        assert!((ssd * ssd + display * display - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unique_product_token_wins() {
        let index = TfIdfIndex::build(&[
            doc("doc1", "carbon footprint of a laptop"),
            doc("doc2", "carbon footprint of latitude5440 laptop"),
            doc("doc3", "carbon footprint report desktop"),
        ])
        .unwrap();
        let result = index
            .retrieve_topk("q", "carbon footprint of latitude5440", 3)
            .unwrap();
        assert_eq!(result.ranked[0].doc_id, "doc2");
        assert!(result.ranked.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn full_text_query_ranks_its_document_first() {
        let docs = [
            doc("a", "alpha beta gamma"),
            doc("b", "beta gamma delta delta"),
            doc("c", "epsilon"),
        ];
        let index = TfIdfIndex::build(&docs).unwrap();
        let result = index.retrieve_topk("q", &docs[1].raw_text, 3).unwrap();
        assert_eq!(result.ranked[0].doc_id, "b");
        assert!((result.ranked[0].score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_terms_fall_back_to_doc_order() {
        let index = TfIdfIndex::build(&[doc("b", "beta"), doc("a", "alpha")]).unwrap();
        let result = index.retrieve_topk("q", "zzz", 5).unwrap();
        assert!(result.no_query_terms);
        let ids: Vec<_> = result.ranked.iter().map(|d| d.doc_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(result.ranked.iter().all(|d| d.score == 0.0));
    }

    #[test]
    fn empty_document_gets_zero_vector() {
        let index = TfIdfIndex::build(&[doc("a", "x y"), doc("b", "beta")]).unwrap();
        assert!(index.doc_vectors[0].is_empty());
        let result = index.retrieve_topk("q", "beta", 1).unwrap();
        assert_eq!(result.ranked[0].doc_id, "b");
    }

    #[test]
    fn build_errors() {
        assert!(matches!(
            TfIdfIndex::build(&[]),
            Err(RetrievalError::EmptyCorpus)
        ));
        assert!(matches!(
            TfIdfIndex::build(&[doc("a", "x"), doc("a", "y")]),
            Err(RetrievalError::DuplicateDocId(_))
        ));
        let index = TfIdfIndex::build(&[doc("a", "xx")]).unwrap();
        assert!(matches!(
            index.retrieve_topk("q", "xx", 0),
            Err(RetrievalError::ZeroK)
        ));
    }

    #[test]
    fn hit_rate_counts_gold_within_k() {
        let gold: HashMap<String, String> = [("q1".to_string(), "c".to_string())].into();
        let results = [result("q1", &["a", "b", "c"])];
        assert_eq!(hit_rate(&results, &gold, 2).unwrap(), 0.0);
        assert_eq!(hit_rate(&results, &gold, 3).unwrap(), 1.0);
        let unknown = [result("q9", &["a"])];
        assert!(matches!(
            hit_rate(&unknown, &gold, 1),
            Err(RetrievalError::UnknownQaId(_))
        ));
    }

    #[test]
    fn index_round_trips_through_json() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("index.json");
        let index = TfIdfIndex::build(&[doc("a", "alpha beta"), doc("b", "beta")]).unwrap();
        index.save(&path).unwrap();
        assert_eq!(TfIdfIndex::load(&path).unwrap(), index);
        let rebuilt = TfIdfIndex::build(&[doc("b", "beta"), doc("a", "alpha beta")]).unwrap();
        assert_eq!(rebuilt, index);
    }
}
