//! Loader for word2vec/GloVe-style text embedding files: one
//! `word v1 v2 ... vdim` line per word.

use std::io::{BufRead, BufReader};
use std::path::Path;

use super::corpus::DataError;
use super::vocab::Vocabulary;

/// Overlay pretrained vectors onto an already-initialized embedding matrix
/// (row-major, one row of `dim` values per vocabulary id). Words absent from
/// the vocabulary are skipped. Returns how many rows were replaced.
pub fn apply_pretrained(
    table: &mut [f64],
    vocab: &Vocabulary,
    dim: usize,
    path: &Path,
) -> Result<usize, DataError> {
    assert_eq!(table.len(), vocab.len() * dim, "embedding table shape mismatch");
    let file = std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    let mut loaded = 0;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DataError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().ok_or_else(|| DataError::Parse {
            line: lineno,
            message: "empty embedding line".into(),
        })?;
        if !vocab.contains(word) {
            continue;
        }
        let id = vocab.id(word);
        let values: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let values = values.map_err(|e| DataError::Parse {
            line: lineno,
            message: format!("bad embedding value for {word}: {e}"),
        })?;
        if values.len() != dim {
            return Err(DataError::Parse {
                line: lineno,
                message: format!("{word}: expected {dim} values, found {}", values.len()),
            });
        }
        table[id * dim..(id + 1) * dim].copy_from_slice(&values);
        loaded += 1;
    }
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus::{Dialogue, Turn};

    fn vocab() -> Vocabulary {
        let corpus = vec![Dialogue {
            id: "d".into(),
            turns: vec![Turn {
                post: vec!["cat".into(), "dog".into()],
                response: vec!["bird".into()],
                knowledge: vec![],
                gold_index: None,
            }],
        }];
        Vocabulary::build(&corpus, 10)
    }

    #[test]
    fn overlays_known_words_only() {
        let v = vocab();
        let dim = 3;
        let mut table = vec![9.0; v.len() * dim];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vecs.txt");
        std::fs::write(&path, "cat 1 2 3\nzebra 4 5 6\ndog 0.5 -0.5 0.25\n").unwrap();
        let loaded = apply_pretrained(&mut table, &v, dim, &path).unwrap();
        assert_eq!(loaded, 2);
        let cat = v.id("cat");
        assert_eq!(&table[cat * dim..(cat + 1) * dim], &[1.0, 2.0, 3.0]);
        let bird = v.id("bird");
        assert_eq!(&table[bird * dim..(bird + 1) * dim], &[9.0, 9.0, 9.0]);
    }

    #[test]
    fn wrong_width_is_an_error() {
        let v = vocab();
        let mut table = vec![0.0; v.len() * 3];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vecs.txt");
        std::fs::write(&path, "cat 1 2\n").unwrap();
        assert!(apply_pretrained(&mut table, &v, 3, &path).is_err());
    }
}
