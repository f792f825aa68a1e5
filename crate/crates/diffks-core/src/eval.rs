//! Model evaluation: eval-mode rollout, greedy decoding, metrics, and the
//! report in both machine and human form.

use serde::Serialize;
use std::fmt;
use std::path::Path;

use crate::checkpoint::{load_checkpoint, CheckpointError};
use crate::config::{Config, HistorySource};
use crate::data::{load_corpus, DataError, Dialogue, Vocabulary};
use crate::metrics::{corpus_bleu, corpus_rouge2, selection_accuracy};
use crate::model::ModelParams;
use crate::rng::{stream, Purpose};
use crate::rollout::forward_dialogue;
use crate::selector::Mode;

#[derive(Debug)]
pub enum EvalError {
    Checkpoint(CheckpointError),
    Data(DataError),
    Io(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Checkpoint(e) => write!(f, "{e}"),
            EvalError::Data(e) => write!(f, "{e}"),
            EvalError::Io(m) => write!(f, "eval io error: {m}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<CheckpointError> for EvalError {
    fn from(e: CheckpointError) -> Self {
        EvalError::Checkpoint(e)
    }
}

impl From<DataError> for EvalError {
    fn from(e: DataError) -> Self {
        EvalError::Data(e)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub acc: f64,
    pub acc_by_turn: Vec<f64>,
    pub turn_counts: Vec<usize>,
    pub bleu2: f64,
    pub bleu4: f64,
    pub rouge2: f64,
    pub n_dialogues: usize,
    pub n_turns: usize,
    /// Which selections fed the history during the rollout.
    pub history: String,
    /// Configuration echo.
    pub config: Config,
}

impl EvalReport {
    /// Accuracy over turn positions >= `min_turn` (1-based).
    pub fn acc_from_turn(&self, min_turn: usize) -> f64 {
        let mut hit = 0.0;
        let mut n = 0usize;
        for (idx, (&a, &c)) in self.acc_by_turn.iter().zip(&self.turn_counts).enumerate() {
            if idx + 1 >= min_turn {
                hit += a * c as f64;
                n += c;
            }
        }
        if n == 0 {
            0.0
        } else {
            hit / n as f64
        }
    }
}

/// Deterministic eval-mode pass over a corpus with an in-memory model.
pub fn evaluate_model(
    model: &ModelParams,
    vocab: &Vocabulary,
    corpus: &[Dialogue],
    config: &Config,
    history: HistorySource,
) -> EvalReport {
    assert!(!corpus.is_empty(), "evaluate: empty corpus");
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    let mut candidates = Vec::new();
    let mut references = Vec::new();
    // Inference consumes no randomness; the stream exists only to satisfy
    // the rollout signature.
    let mut rng = stream(0, Purpose::Dropout, 0);
    for d in corpus {
        let records = forward_dialogue(model, vocab, d, config, Mode::Eval, history, &mut rng);
        for (r, turn) in records.iter().zip(&d.turns) {
            pred.push((r.turn, r.chosen));
            gold.push((r.turn, r.gold));
            let generated = r.generated.as_ref().expect("eval rollout generates");
            candidates.push(vocab.decode(generated));
            references.push(turn.response.clone());
        }
    }
    let accuracy = selection_accuracy(&pred, &gold);
    EvalReport {
        acc: accuracy.overall,
        acc_by_turn: accuracy.by_turn,
        turn_counts: accuracy.counts,
        bleu2: corpus_bleu(&candidates, &references, 2),
        bleu4: corpus_bleu(&candidates, &references, 4),
        rouge2: corpus_rouge2(&candidates, &references),
        n_dialogues: corpus.len(),
        n_turns: pred.len(),
        history: match history {
            HistorySource::Gold => "gold".into(),
            HistorySource::Predicted => "predicted".into(),
        },
        config: config.clone(),
    }
}

/// Evaluate a checkpoint file against a corpus file. The history source
/// defaults to the checkpoint's own eval setting.
pub fn evaluate_checkpoint(
    checkpoint_path: &Path,
    corpus_path: &Path,
    history_override: Option<HistorySource>,
) -> Result<EvalReport, EvalError> {
    let loaded = load_checkpoint(checkpoint_path)?;
    let corpus = load_corpus(corpus_path)?;
    let history = history_override.unwrap_or(loaded.config.eval.history);
    Ok(evaluate_model(&loaded.model, &loaded.vocab, &corpus, &loaded.config, history))
}

/// Human-readable table; the per-turn block mirrors the accuracy-over-turns
/// analyses (1st, 2nd, ... columns).
pub fn render_report(report: &EvalReport, per_turn: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "dialogues {:>6}   turns {:>6}   history {}\n",
        report.n_dialogues, report.n_turns, report.history
    ));
    out.push_str(&format!(
        "ACC {:6.2}   BLEU-2 {:6.2}   BLEU-4 {:6.2}   ROUGE-2 {:6.2}\n",
        100.0 * report.acc,
        100.0 * report.bleu2,
        100.0 * report.bleu4,
        100.0 * report.rouge2
    ));
    if per_turn {
        let ordinal = |n: usize| match n {
            1 => "1st".to_string(),
            2 => "2nd".to_string(),
            3 => "3rd".to_string(),
            n => format!("{n}th"),
        };
        let header: Vec<String> =
            (1..=report.acc_by_turn.len()).map(|t| format!("{:>6}", ordinal(t))).collect();
        out.push_str(&format!("ACC by turn: {}\n", header.join(" ")));
        let row: Vec<String> =
            report.acc_by_turn.iter().map(|a| format!("{:6.2}", 100.0 * a)).collect();
        out.push_str(&format!("             {}\n", row.join(" ")));
    }
    out
}
