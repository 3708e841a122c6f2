use std::collections::{HashMap, HashSet};

use cfrag::corpus::SynthConfig;
use cfrag::evalkit::{Prediction, exact_match};
use cfrag::jsonl;
use cfrag::pipeline::{CriticMode, CriticRecord, RunConfig, run_pipeline};
use cfrag::reasoner::ReasonerOutput;
use cfrag::retrieval::RetrievalResult;

fn config(name: &str) -> RunConfig {
    RunConfig {
        name: name.into(),
        seed: 11,
        synth: Some(SynthConfig {
            documents: 60,
            ..SynthConfig::default()
        }),
        demote_probability: 0.3,
        ..RunConfig::default()
    }
}

#[test]
fn without_a_critic_em_tracks_rank_one_accuracy() {
    let outcome = run_pipeline(&RunConfig {
        critic: CriticMode::None,
        ..config("none")
    })
    .unwrap();
    let golds: HashMap<&str, _> = outcome
        .test_items
        .iter()
        .map(|q| (q.qa_id.as_str(), q))
        .collect();
    // Cross-tabulate rank-1 correctness against per-question exact match.
    let mut table = [[0usize; 2]; 2];
    for (retrieval, pred) in outcome.retrieval.iter().zip(&outcome.predictions) {
        let gold = golds[pred.qa_id.as_str()];
        let top_is_gold = retrieval.ranked[0].doc_id == gold.doc_id;
        let matched = exact_match(&pred.answers, &gold.gold_answers);
        table[top_is_gold as usize][matched as usize] += 1;
    }
    // The oracle is exact on the gold document ...
    assert_eq!(table[1][0], 0, "{table:?}");
    // ... and a wrong document can only match by coincidence.
    let n = outcome.predictions.len() as f64;
    let hit1 = outcome.report.stages.as_ref().unwrap().hit_at[&1];
    let coincidences = table[0][1] as f64;
    assert!((outcome.report.overall.em / 100.0 - hit1 - coincidences / n).abs() < 1e-4);
    assert!(hit1 < 1.0, "demotion should have moved some gold documents");
}

#[test]
fn same_config_twice_gives_identical_reports() {
    let a = run_pipeline(&config("a")).unwrap();
    let b = run_pipeline(&config("a")).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.predictions, b.predictions);
}

#[test]
fn every_test_question_appears_once_in_each_log() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let outcome = run_pipeline(&RunConfig {
        out: Some(out.clone()),
        ..config("audit")
    })
    .unwrap();
    let expected: Vec<&str> = outcome
        .test_items
        .iter()
        .map(|q| q.qa_id.as_str())
        .collect();
    let unique: HashSet<&str> = expected.iter().copied().collect();
    assert_eq!(unique.len(), expected.len());

    let retrieval: Vec<RetrievalResult> = jsonl::read(&out.join("retrieval.jsonl")).unwrap();
    let critic: Vec<CriticRecord> = jsonl::read(&out.join("critic.jsonl")).unwrap();
    let reasoner: Vec<ReasonerOutput> = jsonl::read(&out.join("reasoner.jsonl")).unwrap();
    let predictions: Vec<Prediction> = jsonl::read(&out.join("predictions.jsonl")).unwrap();
    assert_eq!(
        retrieval
            .iter()
            .map(|r| r.qa_id.as_str())
            .collect::<Vec<_>>(),
        expected
    );
    assert_eq!(
        critic.iter().map(|r| r.qa_id.as_str()).collect::<Vec<_>>(),
        expected
    );
    assert_eq!(
        reasoner
            .iter()
            .map(|r| r.qa_id.as_str())
            .collect::<Vec<_>>(),
        expected
    );
    assert_eq!(
        predictions
            .iter()
            .map(|r| r.qa_id.as_str())
            .collect::<Vec<_>>(),
        expected
    );

    let config_back = RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(config_back.name, "audit");
}

#[test]
fn lexical_critic_recovers_demoted_documents() {
    let none = run_pipeline(&RunConfig {
        critic: CriticMode::None,
        ..config("none")
    })
    .unwrap();
    let lexical = run_pipeline(&config("lexical")).unwrap();
    assert_eq!(none.dataset_fingerprint, lexical.dataset_fingerprint);
    assert!(lexical.report.overall.em >= none.report.overall.em);
    let stages = lexical.report.stages.unwrap();
    assert!(stages.selection_accuracy >= stages.rank1_accuracy);
}
