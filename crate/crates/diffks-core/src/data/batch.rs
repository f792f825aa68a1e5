//! Epoch batching: shuffle dialogue indices, slice into batches, keep the
//! remainder.

use rand::seq::SliceRandom;
use rand::Rng;

use super::corpus::{DataError, Dialogue};

pub fn make_batches<R: Rng>(
    corpus: &[Dialogue],
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>, DataError> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    if corpus.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let mut indices: Vec<usize> = (0..corpus.len()).collect();
    indices.shuffle(rng);
    Ok(indices.chunks(batch_size).map(|c| c.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus::Turn;
    use crate::rng::{stream, Purpose};

    fn corpus(n: usize) -> Vec<Dialogue> {
        (0..n)
            .map(|i| Dialogue {
                id: format!("d{i}"),
                turns: vec![Turn {
                    post: vec!["p".into()],
                    response: vec!["r".into()],
                    knowledge: vec![],
                    gold_index: None,
                }],
            })
            .collect()
    }

    #[test]
    fn sixteen_by_eight_gives_two_batches() {
        let batches = make_batches(&corpus(16), 8, &mut stream(1, Purpose::Shuffle, 0)).unwrap();
        assert_eq!(batches.len(), 2);
        assert!(batches.iter().all(|b| b.len() == 8));
    }

    #[test]
    fn remainder_batch_is_kept() {
        let batches = make_batches(&corpus(9), 8, &mut stream(1, Purpose::Shuffle, 0)).unwrap();
        assert_eq!(batches.len(), 2);
        assert_eq!(batches[0].len(), 8);
        assert_eq!(batches[1].len(), 1);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_order() {
        let a = make_batches(&corpus(20), 4, &mut stream(7, Purpose::Shuffle, 2)).unwrap();
        let b = make_batches(&corpus(20), 4, &mut stream(7, Purpose::Shuffle, 2)).unwrap();
        assert_eq!(a, b);
        let c = make_batches(&corpus(20), 4, &mut stream(7, Purpose::Shuffle, 3)).unwrap();
        assert_ne!(a, c, "different epochs should shuffle differently");
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(make_batches(&[], 8, &mut stream(1, Purpose::Shuffle, 0)).is_err());
    }
}
