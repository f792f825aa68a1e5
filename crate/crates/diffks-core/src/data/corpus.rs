//! Corpus model and the one-dialogue-per-line JSON file format.
//!
//! Each line holds `{"id": ..., "turns": [{"post", "response", "knowledge",
//! "gold_knowledge_index"}, ...]}` with raw text fields; loading tokenizes
//! everything and validates gold indices. A gold index of -1 means the turn
//! uses no knowledge.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::tokenize::tokenize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub post: Vec<String>,
    pub response: Vec<String>,
    pub knowledge: Vec<Vec<String>>,
    /// None when the source marks the turn as using no knowledge (-1).
    pub gold_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug)]
pub enum DataError {
    Io(String),
    Parse { line: usize, message: String },
    Validation { line: usize, message: String },
    EmptyCorpus,
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io(m) => write!(f, "data io error: {m}"),
            DataError::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            DataError::Validation { line, message } => {
                write!(f, "validation error at line {line}: {message}")
            }
            DataError::EmptyCorpus => write!(f, "corpus contains no dialogues"),
        }
    }
}

impl std::error::Error for DataError {}

#[derive(Serialize, Deserialize)]
struct RawDialogue {
    id: String,
    turns: Vec<RawTurn>,
}

#[derive(Serialize, Deserialize)]
struct RawTurn {
    post: String,
    response: String,
    #[serde(default)]
    knowledge: Vec<String>,
    gold_knowledge_index: i64,
}

pub fn load_corpus(path: &Path) -> Result<Vec<Dialogue>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    let mut dialogues = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| DataError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDialogue = serde_json::from_str(&line)
            .map_err(|e| DataError::Parse { line: lineno, message: e.to_string() })?;
        dialogues.push(validate_dialogue(raw, lineno)?);
    }
    if dialogues.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    Ok(dialogues)
}

fn validate_dialogue(raw: RawDialogue, line: usize) -> Result<Dialogue, DataError> {
    let invalid = |message: String| DataError::Validation { line, message };
    if raw.turns.is_empty() {
        return Err(invalid(format!("dialogue {} has no turns", raw.id)));
    }
    let mut turns = Vec::with_capacity(raw.turns.len());
    for (t_idx, rt) in raw.turns.into_iter().enumerate() {
        let post = tokenize(&rt.post);
        let response = tokenize(&rt.response);
        if post.is_empty() || response.is_empty() {
            return Err(invalid(format!(
                "dialogue {} turn {}: post and response must be non-empty after tokenization",
                raw.id,
                t_idx + 1
            )));
        }
        let knowledge: Vec<Vec<String>> = rt.knowledge.iter().map(|s| tokenize(s)).collect();
        if knowledge.iter().any(|k| k.is_empty()) {
            return Err(invalid(format!(
                "dialogue {} turn {}: knowledge sentences must be non-empty after tokenization",
                raw.id,
                t_idx + 1
            )));
        }
        let gold_index = match rt.gold_knowledge_index {
            -1 => None,
            g if g >= 0 && (g as usize) < knowledge.len() => Some(g as usize),
            g => {
                return Err(invalid(format!(
                    "dialogue {} turn {}: gold index {} outside pool of {}",
                    raw.id,
                    t_idx + 1,
                    g,
                    knowledge.len()
                )))
            }
        };
        if knowledge.is_empty() && gold_index.is_some() {
            return Err(invalid(format!(
                "dialogue {} turn {}: gold index given but knowledge pool is empty",
                raw.id,
                t_idx + 1
            )));
        }
        turns.push(Turn { post, response, knowledge, gold_index });
    }
    Ok(Dialogue { id: raw.id, turns })
}

/// Write normalized form: tokens re-joined with single spaces. Loading the
/// output reproduces the in-memory corpus exactly.
pub fn save_corpus(path: &Path, corpus: &[Dialogue]) -> Result<(), DataError> {
    let mut f = std::fs::File::create(path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    for d in corpus {
        let raw = RawDialogue {
            id: d.id.clone(),
            turns: d
                .turns
                .iter()
                .map(|t| RawTurn {
                    post: t.post.join(" "),
                    response: t.response.join(" "),
                    knowledge: t.knowledge.iter().map(|k| k.join(" ")).collect(),
                    gold_knowledge_index: t.gold_index.map_or(-1, |g| g as i64),
                })
                .collect(),
        };
        let line = serde_json::to_string(&raw).map_err(|e| DataError::Io(e.to_string()))?;
        writeln!(f, "{line}").map_err(|e| DataError::Io(e.to_string()))?;
    }
    Ok(())
}
