use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::program::{TOTAL_TARGET, answers_agree, expected_answers, generate_gold_program};
use super::templates::{question_text, variant_count};
use super::{Direction, GenError, MAX_ARITY, QAItem, QuestionType};
use crate::corpus::{ExtractionRecord, Schema};
use crate::par::{self, Execution};
use crate::progdsl::run_source;
use crate::seed::derive_seed;

/// Relative weights of the four question families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TypeWeights {
    pub word_match: u32,
    pub calculation: u32,
    pub max_min: u32,
    pub top_n: u32,
}

impl Default for TypeWeights {
    fn default() -> Self {
        TypeWeights {
            word_match: 49,
            calculation: 29,
            max_min: 13,
            top_n: 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    /// Questions generated per document when enough distinct ones exist.
    pub questions_per_doc: usize,
    pub type_weights: TypeWeights,
    /// Relative frequency of 1..=5 targets in word-match and calculation
    /// questions.
    pub arity_weights: [u32; MAX_ARITY],
    /// Draw question phrasings from the paraphrase pool instead of always
    /// using the canonical template.
    pub paraphrase: bool,
    pub execution: Execution,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            questions_per_doc: 12,
            type_weights: TypeWeights::default(),
            arity_weights: [1148, 878, 857, 699, 162],
            paraphrase: true,
            execution: Execution::default(),
        }
    }
}

/// Generates questions, gold programs and gold answers for every record.
///
/// Each document draws from its own stream seeded by `(seed, doc_id)`, so
/// the output does not depend on record order or execution mode. Every gold
/// program is executed and checked against a direct computation before it
/// is emitted.
pub fn generate_questions(
    records: &[ExtractionRecord],
    config: &GenConfig,
    seed: u64,
) -> Result<Vec<QAItem>, GenError> {
    if records.is_empty() {
        return Err(GenError::NoRecords);
    }
    let per_doc = par::try_map(config.execution, records, |record| {
        generate_for_record(record, config, seed)
    })?;
    Ok(per_doc.into_iter().flatten().collect())
}

fn weighted(weights: &[u32]) -> Option<WeightedIndex<u32>> {
    WeightedIndex::new(weights).ok()
}

fn generate_for_record(
    record: &ExtractionRecord,
    config: &GenConfig,
    seed: u64,
) -> Result<Vec<QAItem>, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("qagen/{}", record.doc_id)));
    let tw = config.type_weights;
    let Some(type_dist) = weighted(&[tw.word_match, tw.calculation, tw.max_min, tw.top_n]) else {
        return Ok(Vec::new());
    };
    let arity_dist = weighted(&config.arity_weights);

    let components: Vec<String> = record.component_percents.keys().cloned().collect();
    let stages: Vec<String> = record
        .lifecycle_percents
        .iter()
        .flat_map(|s| s.keys().cloned())
        .collect();
    let mut candidates: Vec<String> = stages.clone();
    candidates.extend(components.iter().cloned());
    // Calculation on a component of a lifecycle report needs the
    // manufacturing share.
    let calc_ok =
        record.schema == Schema::DirectComponent || record.manufacturing_percent().is_some();

    let mut seen: HashSet<(QuestionType, Vec<String>)> = HashSet::new();
    let mut items = Vec::new();
    let max_attempts = config.questions_per_doc * 25;
    for _ in 0..max_attempts {
        if items.len() >= config.questions_per_doc {
            break;
        }
        let qtype = match type_dist.sample(&mut rng) {
            0 => QuestionType::WordMatch,
            1 => QuestionType::Calculation,
            2 => QuestionType::MaxMin(if rng.gen_bool(0.5) {
                Direction::Max
            } else {
                Direction::Min
            }),
            _ => QuestionType::TopN(if rng.gen_bool(0.5) { 3 } else { 5 }),
        };
        let targets: Vec<String> = match qtype {
            QuestionType::TopN(n) if components.len() < n => {
                log::debug!(
                    "{}: skipping top-{n} question, only {} components",
                    record.doc_id,
                    components.len()
                );
                continue;
            }
            QuestionType::MaxMin(_) | QuestionType::TopN(_) => Vec::new(),
            QuestionType::Calculation if !calc_ok => continue,
            QuestionType::WordMatch | QuestionType::Calculation => {
                // The total on its own is asked about as often as any single
                // named target.
                if rng.gen_range(0..=candidates.len()) == 0 {
                    vec![TOTAL_TARGET.to_string()]
                } else {
                    let arity = arity_dist
                        .as_ref()
                        .map_or(1, |d| d.sample(&mut rng) + 1)
                        .min(candidates.len());
                    candidates
                        .choose_multiple(&mut rng, arity)
                        .cloned()
                        .collect()
                }
            }
        };
        let mut key_targets = targets.clone();
        key_targets.sort();
        if !seen.insert((qtype, key_targets)) {
            continue;
        }
        let variant = if config.paraphrase {
            rng.gen_range(0..variant_count(qtype))
        } else {
            0
        };
        let qa_id = format!("{}-q{:02}", record.doc_id, items.len());
        let gold_program = generate_gold_program(record, qtype, &targets)?;
        let executed = run_source(&gold_program)?;
        let expected = expected_answers(record, qtype, &targets)?;
        if !answers_agree(&executed, &expected) {
            return Err(GenError::RoundTrip { qa_id });
        }
        items.push(QAItem {
            question: question_text(record, qtype, &targets, variant),
            qa_id,
            doc_id: record.doc_id.clone(),
            qtype,
            targets,
            gold_program,
            gold_answers: executed,
            split: None,
        });
    }
    if items.len() < config.questions_per_doc {
        log::debug!(
            "{}: generated {} of {} questions",
            record.doc_id,
            items.len(),
            config.questions_per_doc
        );
    }
    Ok(items)
}
