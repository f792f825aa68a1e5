//! Per-turn model inputs: the context window and the candidate pool.

use super::corpus::{Dialogue, Turn};
use super::vocab::EOS_TOKEN;

#[derive(Debug, Clone, Copy)]
pub struct LengthCaps {
    pub context: usize,
    pub response: usize,
    pub knowledge: usize,
    pub pool: usize,
}

impl Default for LengthCaps {
    fn default() -> Self {
        LengthCaps { context: 100, response: 50, knowledge: 40, pool: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    pub tokens: Vec<String>,
}

/// Context at `turn` (1-based): the first turn sees only its own post; later
/// turns see [previous post; previous response; current post], truncated
/// from the front when over the cap.
pub fn assemble_context(dialogue: &Dialogue, turn: usize, caps: &LengthCaps) -> ContextWindow {
    assert!(
        turn >= 1 && turn <= dialogue.turns.len(),
        "turn {} out of range 1..={}",
        turn,
        dialogue.turns.len()
    );
    let mut tokens: Vec<String> = Vec::new();
    if turn >= 2 {
        let prev = &dialogue.turns[turn - 2];
        tokens.extend(prev.post.iter().cloned());
        tokens.extend(prev.response.iter().cloned());
    }
    tokens.extend(dialogue.turns[turn - 1].post.iter().cloned());
    if tokens.len() > caps.context {
        tokens.drain(..tokens.len() - caps.context);
    }
    ContextWindow { tokens }
}

#[derive(Debug, Clone)]
pub struct CandidateSet {
    /// Index 0 is always the single-token empty sentence.
    pub sentences: Vec<Vec<String>>,
    /// Source gold index shifted by one; 0 selects the empty sentence.
    pub shifted_gold: usize,
    /// Validity flags aligned with `sentences`.
    pub valid: Vec<bool>,
}

/// Prepend the empty sentence, truncate sentences to the knowledge length
/// cap, and cap the pool size. The gold sentence always survives capping: if
/// it would fall off the end it replaces the last kept sentence.
pub fn prepare_candidates(turn: &Turn, caps: &LengthCaps) -> CandidateSet {
    assert!(caps.pool >= 2, "pool cap must keep the empty sentence plus one candidate");
    let mut sentences: Vec<Vec<String>> = Vec::with_capacity(turn.knowledge.len() + 1);
    sentences.push(vec![EOS_TOKEN.to_string()]);
    for k in &turn.knowledge {
        let mut s = k.clone();
        s.truncate(caps.knowledge);
        sentences.push(s);
    }
    let mut shifted_gold = turn.gold_index.map_or(0, |g| g + 1);
    if sentences.len() > caps.pool {
        if shifted_gold >= caps.pool {
            sentences.swap(caps.pool - 1, shifted_gold);
            shifted_gold = caps.pool - 1;
        }
        sentences.truncate(caps.pool);
    }
    let valid = vec![true; sentences.len()];
    CandidateSet { sentences, shifted_gold, valid }
}
