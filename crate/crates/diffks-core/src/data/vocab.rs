//! Token vocabulary with fixed special ids.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::corpus::{DataError, Dialogue};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const SOS: usize = 2;
pub const EOS: usize = 3;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const SOS_TOKEN: &str = "<sos>";
pub const EOS_TOKEN: &str = "<eos>";

const SPECIALS: [&str; 4] = [PAD_TOKEN, UNK_TOKEN, SOS_TOKEN, EOS_TOKEN];

#[derive(Debug, Clone)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    fn with_tokens(tokens: impl IntoIterator<Item = String>) -> Vocabulary {
        let mut id_to_token: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        id_to_token.extend(tokens);
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { token_to_id, id_to_token }
    }

    /// The `cap` most frequent tokens over posts, responses and knowledge;
    /// frequency ties go to the token seen first.
    pub fn build(corpus: &[Dialogue], cap: usize) -> Vocabulary {
        assert!(cap >= 1, "vocabulary cap must be at least 1");
        assert!(!corpus.is_empty(), "cannot build a vocabulary from an empty corpus");
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new(); // token -> (count, first_seen)
        let mut order = 0usize;
        for d in corpus {
            for t in &d.turns {
                for tok in t.post.iter().chain(t.response.iter()).chain(t.knowledge.iter().flatten()) {
                    let e = counts.entry(tok.as_str()).or_insert_with(|| {
                        let o = order;
                        order += 1;
                        (0, o)
                    });
                    e.0 += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, (usize, usize))> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then(a.1 .1.cmp(&b.1 .1)));
        ranked.truncate(cap);
        Vocabulary::with_tokens(ranked.into_iter().map(|(t, _)| t.to_string()))
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.id_to_token[i].clone()).collect()
    }

    /// Non-special tokens in id order, for checkpoints.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token[SPECIALS.len()..]
    }

    pub fn from_tokens(tokens: Vec<String>) -> Vocabulary {
        Vocabulary::with_tokens(tokens)
    }

    /// One token per line; line number equals id minus the 4 specials.
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut f = std::fs::File::create(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        for t in self.tokens() {
            writeln!(f, "{t}").map_err(|e| DataError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Vocabulary, DataError> {
        let f = std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
        let mut tokens = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line.map_err(|e| DataError::Io(e.to_string()))?;
            if !line.is_empty() {
                tokens.push(line);
            }
        }
        Ok(Vocabulary::with_tokens(tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus::{Dialogue, Turn};

    fn corpus_of(tokens: &[&str]) -> Vec<Dialogue> {
        vec![Dialogue {
            id: "d0".into(),
            turns: vec![Turn {
                post: tokens.iter().map(|s| s.to_string()).collect(),
                response: vec!["r".into()],
                knowledge: vec![],
                gold_index: None,
            }],
        }]
    }

    #[test]
    fn frequency_order_with_cap() {
        let corpus = corpus_of(&["a", "a", "a", "b", "b", "c"]);
        let v = Vocabulary::build(&corpus, 2);
        assert_eq!(v.len(), 6); // 4 specials + a + b
        assert!(v.contains("a") && v.contains("b"));
        assert_eq!(v.id("c"), UNK);
        assert_eq!(v.id("r"), UNK); // response token lost to the cap
    }

    #[test]
    fn tie_breaks_by_first_occurrence() {
        let corpus = corpus_of(&["a", "b", "a", "b"]);
        let v = Vocabulary::build(&corpus, 1);
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
    }

    #[test]
    fn specials_have_fixed_ids() {
        let corpus = corpus_of(&["x"]);
        let v = Vocabulary::build(&corpus, 10);
        assert_eq!(v.id(PAD_TOKEN), PAD);
        assert_eq!(v.id(UNK_TOKEN), UNK);
        assert_eq!(v.id(SOS_TOKEN), SOS);
        assert_eq!(v.id(EOS_TOKEN), EOS);
        assert_eq!(v.token(EOS), EOS_TOKEN);
    }

    #[test]
    fn counts_cover_knowledge_and_responses() {
        let corpus = vec![Dialogue {
            id: "d".into(),
            turns: vec![Turn {
                post: vec!["p".into()],
                response: vec!["resp".into(), "resp".into()],
                knowledge: vec![vec!["know".into(), "know".into(), "know".into()]],
                gold_index: Some(0),
            }],
        }];
        let v = Vocabulary::build(&corpus, 2);
        assert!(v.contains("know") && v.contains("resp"));
        assert!(!v.contains("p"));
    }

    #[test]
    fn save_load_round_trip() {
        let corpus = corpus_of(&["alpha", "beta", "alpha"]);
        let v = Vocabulary::build(&corpus, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        v.save(&path).unwrap();
        let w = Vocabulary::load(&path).unwrap();
        assert_eq!(v.len(), w.len());
        for id in 0..v.len() {
            assert_eq!(v.token(id), w.token(id));
        }
    }
}
