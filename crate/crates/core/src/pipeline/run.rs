use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CriticMode, PipelineError, ReasonerMode, RetrieverMode, RunConfig};
use crate::corpus::{Document, ExtractionRecord, extract_document, load_corpus, synthesize_corpus};
use crate::critic::{
    CriticVerdict, LexicalCritic, Selection, build_critic_prompt, parse_critic_response,
    resolve_verdict,
};
use crate::evalkit::{
    EvalReport, FailureKind, Prediction, StageStats, build_report, render_report,
};
use crate::jsonl;
use crate::llmgate::{LlmClient, LlmStatus, RequestLogEntry};
use crate::par;
use crate::progdsl::{ExecError, run_source};
use crate::qagen::{QAItem, Split, generate_questions, read_dataset, split_dataset};
use crate::reasoner::{
    GenerationFailure, Provenance, ReasonerOutput, build_reasoner_prompt, oracle_reason,
    parse_reasoner_response,
};
use crate::retrieval::{RetrievalResult, ScoredDoc, TfIdfIndex, hit_curve};
use crate::seed::{derive_seed, sha256_hex};

/// The critic's decision for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticRecord {
    pub qa_id: String,
    /// Documents shown to the critic, in presentation order.
    pub candidates: Vec<String>,
    pub verdict: CriticVerdict,
    pub gold_doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_completion: Option<String>,
}

/// Everything a run produced, each list sorted by qa_id.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub report: EvalReport,
    /// Full question set, both splits.
    pub dataset: Vec<QAItem>,
    /// The evaluated questions.
    pub test_items: Vec<QAItem>,
    pub retrieval: Vec<RetrievalResult>,
    pub critic: Vec<CriticRecord>,
    pub reasoner: Vec<ReasonerOutput>,
    pub predictions: Vec<Prediction>,
    pub llm_requests: Vec<RequestLogEntry>,
    /// SHA-256 over the evaluated questions; equal fingerprints mean two
    /// runs scored the same questions.
    pub dataset_fingerprint: String,
}

/// Reads the corpus directory, or synthesizes one.
pub fn load_documents(config: &RunConfig) -> Result<Vec<Document>, PipelineError> {
    match &config.corpus {
        Some(dir) => Ok(load_corpus(dir)?),
        None => {
            let synth = config.synth.clone().unwrap_or_default();
            let (docs, _) = synthesize_corpus(&synth, config.seed)
                .map_err(|e| PipelineError::Config(format!("synth: {e}")))?;
            Ok(docs)
        }
    }
}

/// Extracts records (discards are logged and skipped), then reads or
/// generates the question set and makes sure every question has a split.
pub fn prepare_dataset(
    config: &RunConfig,
    docs: &[Document],
) -> Result<(Vec<ExtractionRecord>, Vec<QAItem>), PipelineError> {
    let mut records = Vec::with_capacity(docs.len());
    for doc in docs {
        match extract_document(doc) {
            Ok(record) => records.push(record),
            Err(discard) => log::warn!(
                "{}: discarded ({} {})",
                discard.doc_id,
                discard.field,
                discard.reason.as_str()
            ),
        }
    }

    let mut items = match &config.dataset {
        Some(path) => read_dataset(path)?,
        None => generate_questions(&records, &config.generation, config.seed)?,
    };
    if items.iter().any(|q| q.split.is_none()) {
        items = split_dataset(items, config.split_ratio, config.seed)?;
    }
    let known: std::collections::HashSet<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
    if let Some(q) = items.iter().find(|q| !known.contains(q.doc_id.as_str())) {
        return Err(PipelineError::UnknownDocument {
            qa_id: q.qa_id.clone(),
            doc_id: q.doc_id.clone(),
        });
    }
    items.sort_by(|a, b| a.qa_id.cmp(&b.qa_id));
    Ok((records, items))
}

pub fn dataset_fingerprint(items: &[QAItem]) -> String {
    let text: String = items
        .iter()
        .map(|q| serde_json::to_string(q).expect("questions serialize") + "\n")
        .collect();
    sha256_hex(&text)
}

/// Moves a first-ranked gold document to a uniformly chosen position in
/// `2..=min(k, len)` with probability `p`. The draw depends only on the
/// seed and qa_id.
fn demote(result: &mut RetrievalResult, gold: &str, k: usize, p: f64, seed: u64) {
    if p <= 0.0 {
        return;
    }
    let depth = k.min(result.ranked.len());
    if depth < 2 || result.ranked[0].doc_id != gold {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("demote/{}", result.qa_id)));
    if rng.gen_bool(p) {
        let to = rng.gen_range(2..=depth);
        let doc = result.ranked.remove(0);
        result.ranked.insert(to - 1, doc);
    }
}

fn retrieve(
    config: &RunConfig,
    docs: &[Document],
    items: &[QAItem],
) -> Result<Vec<RetrievalResult>, PipelineError> {
    match config.retriever {
        RetrieverMode::Gold => Ok(items
            .iter()
            .map(|q| RetrievalResult {
                qa_id: q.qa_id.clone(),
                ranked: vec![ScoredDoc {
                    doc_id: q.doc_id.clone(),
                    score: 1.0,
                }],
                no_query_terms: false,
                gold_doc_id: Some(q.doc_id.clone()),
            })
            .collect()),
        RetrieverMode::Tfidf => {
            let index = TfIdfIndex::build_with(docs, config.execution)?;
            let depth = config
                .hit_ks
                .iter()
                .copied()
                .chain([config.k])
                .max()
                .unwrap_or(config.k)
                .min(index.len());
            let mut results = index.retrieve_all(items, depth, config.execution)?;
            for (result, item) in results.iter_mut().zip(items) {
                demote(
                    result,
                    &item.doc_id,
                    config.k,
                    config.demote_probability,
                    config.seed,
                );
            }
            Ok(results)
        }
    }
}

fn truncated(result: &RetrievalResult, k: usize) -> RetrievalResult {
    RetrievalResult {
        ranked: result.ranked.iter().take(k).cloned().collect(),
        ..result.clone()
    }
}

fn run_critic(
    config: &RunConfig,
    texts: &HashMap<&str, &str>,
    lexical: Option<&LexicalCritic>,
    client: Option<&LlmClient>,
    item: &QAItem,
    retrieval: &RetrievalResult,
) -> CriticRecord {
    let shown = truncated(retrieval, config.k);
    let candidates: Vec<String> = shown.ranked.iter().map(|d| d.doc_id.clone()).collect();
    let mut raw_completion = None;
    let selection = match config.critic {
        CriticMode::None => Selection::Ids(vec![1]),
        CriticMode::Lexical => {
            let ids: Vec<&str> = candidates.iter().map(String::as_str).collect();
            lexical
                .expect("lexical critic is built for lexical mode")
                .select(&item.question, &ids)
                .unwrap_or(Selection::ParseFailure)
        }
        CriticMode::Remote => {
            let client = client.expect("client is built for remote mode");
            let refs: Vec<&str> = candidates.iter().map(|id| texts[id.as_str()]).collect();
            let prompt = build_critic_prompt(&item.question, &refs);
            let response =
                client.complete(&client.request(format!("critic/{}", item.qa_id), prompt));
            let selection = match response.status {
                LlmStatus::Ok | LlmStatus::Truncated => {
                    parse_critic_response(&response.completion, candidates.len())
                }
                _ => Selection::ParseFailure,
            };
            raw_completion = Some(response.completion);
            selection
        }
    };
    CriticRecord {
        qa_id: item.qa_id.clone(),
        verdict: resolve_verdict(selection, &shown),
        candidates,
        gold_doc_id: item.doc_id.clone(),
        raw_completion,
    }
}

fn run_reasoner(
    config: &RunConfig,
    client: Option<&LlmClient>,
    item: &QAItem,
    reference: &str,
) -> ReasonerOutput {
    match config.reasoner {
        ReasonerMode::Oracle => oracle_reason(item.view(), reference),
        ReasonerMode::Remote => {
            let client = client.expect("client is built for remote mode");
            let prompt = build_reasoner_prompt(&item.question, reference);
            let response =
                client.complete(&client.request(format!("reasoner/{}", item.qa_id), prompt));
            let mut out = match response.status {
                LlmStatus::Ok | LlmStatus::Truncated => {
                    match parse_reasoner_response(&response.completion) {
                        Ok(program) => {
                            ReasonerOutput::program(&item.qa_id, Provenance::Remote, program)
                        }
                        Err(failure) => {
                            ReasonerOutput::failed(&item.qa_id, Provenance::Remote, failure)
                        }
                    }
                }
                status => ReasonerOutput::failed(
                    &item.qa_id,
                    Provenance::Remote,
                    GenerationFailure::Remote(format!("{status:?}")),
                ),
            };
            out.raw_completion = Some(response.completion);
            out
        }
    }
}

fn predict(item: &QAItem, chosen_doc: &str, output: &ReasonerOutput) -> Prediction {
    if let Some(source) = &output.program_source {
        return match run_source(source) {
            Ok(answers) => Prediction::answered(&item.qa_id, answers),
            Err(ExecError::ParseError { .. }) => {
                Prediction::failed(&item.qa_id, FailureKind::ParseFailure)
            }
            Err(_) => Prediction::failed(&item.qa_id, FailureKind::ExecFailure),
        };
    }
    let kind = match &output.failure {
        Some(
            GenerationFailure::MissingTarget(_) | GenerationFailure::UnreadableReference { .. },
        ) if chosen_doc != item.doc_id => FailureKind::WrongDoc,
        _ => FailureKind::GenerationFailure,
    };
    Prediction::failed(&item.qa_id, kind)
}

fn stage_stats(
    config: &RunConfig,
    retrieval: &[RetrievalResult],
    critic: &[CriticRecord],
) -> Result<StageStats, PipelineError> {
    let gold = HashMap::new();
    let mut ks: Vec<usize> = config.hit_ks.clone();
    ks.sort_unstable();
    ks.dedup();
    let hit_at: BTreeMap<usize, f64> = hit_curve(retrieval, &gold, &ks)?.into_iter().collect();
    let rank1 = hit_curve(retrieval, &gold, &[1])?[0].1;
    let n = critic.len() as f64;
    let selected = critic
        .iter()
        .filter(|c| c.verdict.chosen_doc_id == c.gold_doc_id)
        .count() as f64;
    Ok(StageStats {
        k: config.k,
        hit_at,
        rank1_accuracy: rank1,
        selection_accuracy: selected / n,
        critic_fallbacks: critic.iter().filter(|c| c.verdict.fell_back).count(),
    })
}

/// Runs one configuration over the test split and, when `out` is set,
/// writes every stage's records there.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    let docs = load_documents(config)?;
    let (_, dataset) = prepare_dataset(config, &docs)?;
    let test_items: Vec<QAItem> = dataset
        .iter()
        .filter(|q| q.split == Some(Split::Test))
        .cloned()
        .collect();
    if test_items.is_empty() {
        return Err(PipelineError::NoTestQuestions);
    }
    log::info!(
        "{}: {} documents, {} questions, {} in the test split",
        config.name,
        docs.len(),
        dataset.len(),
        test_items.len()
    );

    let texts: HashMap<&str, &str> = docs
        .iter()
        .map(|d| (d.doc_id.as_str(), d.raw_text.as_str()))
        .collect();
    let client = if config.uses_llm() {
        Some(LlmClient::new(config.llm.clone().with_env())?)
    } else {
        None
    };
    let lexical = (config.critic == CriticMode::Lexical).then(|| {
        LexicalCritic::new(
            docs.iter()
                .map(|d| (d.doc_id.as_str(), d.raw_text.as_str())),
        )
    });

    let retrieval = retrieve(config, &docs, &test_items)?;

    let pairs: Vec<(&QAItem, &RetrievalResult)> = test_items.iter().zip(&retrieval).collect();
    let staged = par::map(config.execution, &pairs, |(item, result)| {
        let critic = run_critic(
            config,
            &texts,
            lexical.as_ref(),
            client.as_ref(),
            item,
            result,
        );
        let reference = texts[critic.verdict.chosen_doc_id.as_str()];
        let reasoner = run_reasoner(config, client.as_ref(), item, reference);
        let prediction = predict(item, &critic.verdict.chosen_doc_id, &reasoner);
        (critic, reasoner, prediction)
    });
    let mut critic = Vec::with_capacity(staged.len());
    let mut reasoner = Vec::with_capacity(staged.len());
    let mut predictions = Vec::with_capacity(staged.len());
    for (c, r, p) in staged {
        critic.push(c);
        reasoner.push(r);
        predictions.push(p);
    }

    let stages = stage_stats(config, &retrieval, &critic)?;
    let report = build_report(&predictions, &test_items, Some(stages))?;
    let outcome = RunOutcome {
        name: config.name.clone(),
        report,
        dataset_fingerprint: dataset_fingerprint(&test_items),
        dataset,
        test_items,
        retrieval,
        critic,
        reasoner,
        predictions,
        llm_requests: client.map(|c| c.request_log()).unwrap_or_default(),
    };
    if let Some(out) = &config.out {
        write_artifacts(out, config, &outcome)?;
    }
    Ok(outcome)
}

fn write_artifacts(
    dir: &Path,
    config: &RunConfig,
    outcome: &RunOutcome,
) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(PipelineError::io(dir))?;
    let write_text = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(PipelineError::io(path))
    };
    write_text("config.toml", config.to_toml_string())?;
    jsonl::write(&dir.join("dataset.jsonl"), &outcome.dataset)?;
    jsonl::write(&dir.join("retrieval.jsonl"), &outcome.retrieval)?;
    jsonl::write(&dir.join("critic.jsonl"), &outcome.critic)?;
    jsonl::write(&dir.join("reasoner.jsonl"), &outcome.reasoner)?;
    jsonl::write(&dir.join("predictions.jsonl"), &outcome.predictions)?;
    if config.uses_llm() {
        jsonl::write(&dir.join("llm_requests.jsonl"), &outcome.llm_requests)?;
    }
    let report = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    write_text("report.json", report + "\n")?;
    write_text("report.txt", render_report(&outcome.report))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SynthConfig;
    use crate::llmgate::{MockConfig, MockServer};

    fn small(name: &str) -> RunConfig {
        RunConfig {
            name: name.into(),
            seed: 3,
            synth: Some(SynthConfig {
                documents: 30,
                ..SynthConfig::default()
            }),
            ..RunConfig::default()
        }
    }

    #[test]
    fn gold_bypass_with_oracle_is_exact() {
        let config = RunConfig {
            retriever: RetrieverMode::Gold,
            ..small("gold")
        };
        let outcome = run_pipeline(&config).unwrap();
        assert_eq!(outcome.report.overall.em, 100.0);
        assert_eq!(outcome.report.overall.rmse, 0.0);
        assert!(outcome.report.failures.is_empty());
        assert_eq!(outcome.predictions.len(), outcome.test_items.len());
    }

    #[test]
    fn outcome_is_independent_of_execution_mode() {
        let seq = run_pipeline(&RunConfig {
            execution: par::Execution::Sequential,
            demote_probability: 0.3,
            ..small("seq")
        })
        .unwrap();
        let par_run = run_pipeline(&RunConfig {
            execution: par::Execution::Parallel,
            demote_probability: 0.3,
            ..small("par")
        })
        .unwrap();
        assert_eq!(seq.predictions, par_run.predictions);
        assert_eq!(seq.retrieval, par_run.retrieval);
        assert_eq!(seq.dataset_fingerprint, par_run.dataset_fingerprint);
    }

    #[test]
    fn demotion_moves_gold_within_k() {
        let mut moved = 0;
        for i in 0..200 {
            let mut result = RetrievalResult {
                qa_id: format!("q{i}"),
                ranked: (0..10)
                    .map(|d| ScoredDoc {
                        doc_id: format!("d{d}"),
                        score: 1.0 - d as f64 / 10.0,
                    })
                    .collect(),
                no_query_terms: false,
                gold_doc_id: Some("d0".into()),
            };
            demote(&mut result, "d0", 5, 0.5, 1);
            let rank = result.rank_of("d0").unwrap();
            assert!(rank <= 5);
            if rank > 1 {
                moved += 1;
            }
            assert_eq!(result.ranked.len(), 10);
        }
        assert!((60..140).contains(&moved), "{moved}");
    }

    #[test]
    fn writes_artifacts_sorted_by_question() {
        let tmp = tempfile::tempdir().unwrap();
        let config = RunConfig {
            out: Some(tmp.path().join("run")),
            ..small("artifacts")
        };
        let outcome = run_pipeline(&config).unwrap();
        for name in [
            "config.toml",
            "dataset.jsonl",
            "retrieval.jsonl",
            "critic.jsonl",
            "reasoner.jsonl",
            "predictions.jsonl",
            "report.json",
            "report.txt",
        ] {
            assert!(tmp.path().join("run").join(name).exists(), "{name}");
        }
        let preds: Vec<Prediction> =
            jsonl::read(&tmp.path().join("run/predictions.jsonl")).unwrap();
        assert_eq!(preds, outcome.predictions);
        assert!(preds.windows(2).all(|w| w[0].qa_id < w[1].qa_id));
    }

    #[test]
    fn unknown_dataset_document_is_a_data_error() {
        let tmp = tempfile::tempdir().unwrap();
        let base = small("x");
        let docs = load_documents(&base).unwrap();
        let (_, mut items) = prepare_dataset(&base, &docs).unwrap();
        items[0].doc_id = "missing".into();
        let path = tmp.path().join("qa.jsonl");
        crate::qagen::write_dataset(&path, &items).unwrap();
        let err = run_pipeline(&RunConfig {
            dataset: Some(path),
            ..base
        })
        .unwrap_err();
        assert!(matches!(err, PipelineError::UnknownDocument { .. }));
        assert!(!err.is_config_error());
    }

    #[test]
    fn remote_failures_are_scored_not_fatal() {
        // The mock answers every prompt with text holding neither an id
        // list nor a program.
        let server = MockServer::start(MockConfig {
            default_completion: "I cannot tell.".into(),
            ..MockConfig::default()
        })
        .unwrap();
        let mut config = RunConfig {
            critic: CriticMode::Remote,
            reasoner: ReasonerMode::Remote,
            ..small("remote")
        };
        config.llm.url = Some(server.url());
        config.llm.backoff_ms = vec![1];
        let outcome = run_pipeline(&config).unwrap();
        let n = outcome.test_items.len();
        assert_eq!(outcome.report.failures[&FailureKind::GenerationFailure], n);
        assert_eq!(outcome.report.stages.as_ref().unwrap().critic_fallbacks, n);
        assert_eq!(outcome.llm_requests.len(), 2 * n);
        assert_eq!(outcome.report.overall.em, 0.0);
    }
}
