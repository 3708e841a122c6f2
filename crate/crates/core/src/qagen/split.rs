use std::collections::{BTreeSet, HashSet};

use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{GenError, QAItem, Split};
use crate::seed::derive_seed;

/// Partitions document ids into `(train, test)` by count. The train side
/// gets `ceil(ratio * n)` documents.
pub fn split_documents<'a, I>(
    doc_ids: I,
    ratio: f64,
    seed: u64,
) -> Result<(HashSet<String>, HashSet<String>), GenError>
where
    I: IntoIterator<Item = &'a str>,
{
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(GenError::BadRatio(ratio));
    }
    let unique: BTreeSet<&str> = doc_ids.into_iter().collect();
    let mut docs: Vec<&str> = unique.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "split"));
    docs.shuffle(&mut rng);
    let n_train = ((ratio * docs.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let n_train = n_train.min(docs.len());
    let train = docs[..n_train].iter().map(|s| s.to_string()).collect();
    let test = docs[n_train..].iter().map(|s| s.to_string()).collect();
    Ok((train, test))
}

/// Assigns every question the split of its document.
pub fn split_dataset(
    mut items: Vec<QAItem>,
    ratio: f64,
    seed: u64,
) -> Result<Vec<QAItem>, GenError> {
    let (train, _) = split_documents(items.iter().map(|q| q.doc_id.as_str()), ratio, seed)?;
    for item in &mut items {
        item.split = Some(if train.contains(&item.doc_id) {
            Split::Train
        } else {
            Split::Test
        });
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qagen::QuestionType;

    fn items(docs: usize, per_doc: usize) -> Vec<QAItem> {
        (0..docs)
            .flat_map(|d| {
                (0..per_doc).map(move |q| QAItem {
                    qa_id: format!("doc{d:02}-q{q:02}"),
                    doc_id: format!("doc{d:02}"),
                    qtype: QuestionType::WordMatch,
                    question: String::new(),
                    targets: vec!["total".into()],
                    gold_program: "answer=[1.0]".into(),
                    gold_answers: vec![],
                    split: None,
                })
            })
            .collect()
    }

    #[test]
    fn ten_documents_split_eight_two() {
        let ids: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
        let (train, test) = split_documents(ids.iter().map(String::as_str), 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        assert!(train.is_disjoint(&test));
    }

    #[test]
    fn questions_follow_their_document() {
        let split = split_dataset(items(10, 3), 0.8, 7).unwrap();
        for doc in split.chunks(3) {
            assert!(doc.iter().all(|q| q.split == doc[0].split));
        }
        let test_docs: HashSet<_> = split
            .iter()
            .filter(|q| q.split == Some(Split::Test))
            .map(|q| &q.doc_id)
            .collect();
        assert_eq!(test_docs.len(), 2);
    }

    #[test]
    fn same_seed_same_partition() {
        let a = split_dataset(items(20, 1), 0.8, 3).unwrap();
        let b = split_dataset(items(20, 1), 0.8, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_ratio_is_rejected() {
        for ratio in [0.0, 1.0, -0.2, f64::NAN] {
            assert!(matches!(
                split_dataset(items(2, 1), ratio, 0),
                Err(GenError::BadRatio(_))
            ));
        }
    }
}
