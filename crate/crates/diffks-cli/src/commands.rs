//! Subcommand implementations and the error-to-exit-code mapping.

use std::io::{BufRead, Write};
use std::path::Path;

use diffks_core::checkpoint::{load_checkpoint, CheckpointError};
use diffks_core::config::{Config, ConfigError, HistorySource};
use diffks_core::data::{
    assemble_context, load_corpus, make_synthetic_context_corpus, make_synthetic_transition_corpus,
    prepare_candidates, save_corpus, tokenize, DataError, Dialogue, Turn,
};
use diffks_core::decoder::greedy_decode;
use diffks_core::encoder::encode_turn;
use diffks_core::eval::{evaluate_checkpoint, render_report, EvalError};
use diffks_core::gradcheck::run_scale;
use diffks_core::rollout::caps_of;
use diffks_core::selector::{select, Mode, SelectionState};
use diffks_core::train::TrainError;

pub struct AppError {
    pub code: u8,
    pub message: String,
}

fn config_err(message: String) -> AppError {
    AppError { code: 2, message }
}

fn data_err(message: String) -> AppError {
    AppError { code: 3, message }
}

fn numeric_err(message: String) -> AppError {
    AppError { code: 4, message }
}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        config_err(e.to_string())
    }
}

impl From<DataError> for AppError {
    fn from(e: DataError) -> Self {
        data_err(e.to_string())
    }
}

impl From<CheckpointError> for AppError {
    fn from(e: CheckpointError) -> Self {
        data_err(e.to_string())
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        data_err(e.to_string())
    }
}

impl From<TrainError> for AppError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(c) => c.into(),
            TrainError::Optim(o) => numeric_err(o.to_string()),
            other => data_err(other.to_string()),
        }
    }
}

pub fn train(
    config_path: &Path,
    data_dir: &Path,
    run_dir: &Path,
    seed: Option<u64>,
    epochs: Option<usize>,
    resume: Option<&Path>,
) -> Result<(), AppError> {
    let mut config = Config::load(config_path)?;
    if let Some(s) = seed {
        config.train.seed = s;
    }
    if let Some(e) = epochs {
        config.train.epochs = e;
    }
    config.validate()?;
    let corpus = load_corpus(&data_dir.join(&config.data.train_file))?;
    let dev = load_corpus(&data_dir.join(&config.data.dev_file))?;
    let outcome = diffks_core::train::train(&config, &corpus, &dev, run_dir, resume)?;
    println!(
        "trained {} epoch(s), {} parameters; best dev BLEU-4 {:.4} at epoch {}; checkpoints in {}",
        outcome.epochs_run,
        outcome.n_params,
        outcome.best_bleu4,
        outcome.best_epoch,
        run_dir.display()
    );
    Ok(())
}

pub fn eval(
    checkpoint: &Path,
    corpus: &Path,
    history: Option<&str>,
    per_turn: bool,
    out: &Path,
) -> Result<(), AppError> {
    let history = match history {
        None => None,
        Some("gold") => Some(HistorySource::Gold),
        Some("predicted") => Some(HistorySource::Predicted),
        Some(other) => {
            return Err(config_err(format!("--history must be gold or predicted, got {other}")))
        }
    };
    let report = evaluate_checkpoint(checkpoint, corpus, history)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| data_err(format!("report serialization: {e}")))?;
    std::fs::write(out, json).map_err(|e| data_err(format!("{}: {e}", out.display())))?;
    print!("{}", render_report(&report, per_turn));
    println!("report written to {}", out.display());
    Ok(())
}

pub fn gradcheck(scale: &str, seed: u64) -> Result<(), AppError> {
    if !matches!(scale, "op" | "module" | "end2end" | "all") {
        return Err(config_err(format!(
            "--scale must be op, module, end2end or all, got {scale}"
        )));
    }
    let results = run_scale(scale, seed);
    let mut failures = 0;
    println!("{:<8} {:<55} {:>12} {:>9} {:>6}", "scale", "check", "max rel err", "tol", "status");
    for r in &results {
        let status = if r.passed() { "pass" } else { "FAIL" };
        if !r.passed() {
            failures += 1;
        }
        println!("{:<8} {:<55} {:>12.3e} {:>9.0e} {:>6}", r.scale, r.name, r.max_rel_err, r.tol, status);
    }
    if failures > 0 {
        return Err(numeric_err(format!("{failures} gradient check(s) failed")));
    }
    println!("all {} checks passed", results.len());
    Ok(())
}

pub fn synth(kind: &str, k: usize, n: usize, t: usize, seed: u64, out: &Path) -> Result<(), AppError> {
    if k < 2 {
        return Err(config_err(format!("--k must be at least 2, got {k}")));
    }
    if t < 2 {
        return Err(config_err(format!("--t must be at least 2, got {t}")));
    }
    if n == 0 {
        return Err(config_err("--n must be positive".into()));
    }
    let corpus = match kind {
        "transition" => make_synthetic_transition_corpus(k, n, t, seed),
        "context" => make_synthetic_context_corpus(k, n, t, seed),
        other => return Err(config_err(format!("--kind must be transition or context, got {other}"))),
    };
    save_corpus(out, &corpus)?;
    let turns: usize = corpus.iter().map(|d| d.turns.len()).sum();
    println!("wrote {} dialogues ({} turns) to {}", corpus.len(), turns, out.display());
    Ok(())
}

/// Index 0 is the empty sentence; it displays as "(no knowledge)".
fn selection_display(chosen: usize, sentences: &[Vec<String>]) -> String {
    if chosen == 0 {
        "(no knowledge)".to_string()
    } else {
        sentences[chosen].join(" ")
    }
}

pub fn chat(checkpoint: &Path, knowledge: &Path, show_selection: bool, max_len: usize) -> Result<(), AppError> {
    let loaded = load_checkpoint(checkpoint)?;
    let text = std::fs::read_to_string(knowledge)
        .map_err(|e| data_err(format!("{}: {e}", knowledge.display())))?;
    let pool: Vec<Vec<String>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(tokenize)
        .collect();
    if pool.is_empty() {
        return Err(data_err(format!("{}: no knowledge sentences", knowledge.display())));
    }
    let config = &loaded.config;
    let vocab = &loaded.vocab;
    let model = &loaded.model;
    let caps = caps_of(config);
    let mut state = SelectionState::new(config.selector.m, config.selector.weights());
    // the rolling one-dialogue transcript: model replies play the response role
    let mut dialogue = Dialogue { id: "chat".into(), turns: Vec::new() };
    let mut rng = diffks_core::rng::stream(0, diffks_core::rng::Purpose::Dropout, 0);

    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        print!("> ");
        std::io::stdout().flush().ok();
        let line = match lines.next() {
            Some(Ok(l)) => l,
            _ => break,
        };
        let post = tokenize(&line);
        if post.is_empty() {
            continue;
        }
        dialogue.turns.push(Turn {
            post,
            response: vec!["...".into()], // placeholder until the reply exists
            knowledge: pool.clone(),
            gold_index: None,
        });
        let turn_idx = dialogue.turns.len();
        let context = assemble_context(&dialogue, turn_idx, &caps);
        let candidates = prepare_candidates(&dialogue.turns[turn_idx - 1], &caps);
        let candidate_ids: Vec<Vec<usize>> =
            candidates.sentences.iter().map(|s| vocab.encode(s)).collect();
        let encoding = encode_turn(
            &model.encoder,
            &vocab.encode(&context.tokens),
            &candidate_ids,
            0.0,
            false,
            &mut rng,
        );
        let out = select(
            &model.selector,
            &encoding,
            &mut state,
            &candidates.valid,
            config.selector.variant,
            config.selector.ablation,
            None,
            Mode::Eval,
        );
        if show_selection {
            let alpha = out.alpha.to_vec();
            let mut ranked: Vec<(usize, f64)> = alpha.iter().copied().enumerate().collect();
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            println!("[selected {}] {}", out.chosen, selection_display(out.chosen, &candidates.sentences));
            let top: Vec<String> = ranked
                .iter()
                .take(3)
                .map(|(i, a)| format!("{i}:{a:.4}"))
                .collect();
            println!("[alpha] {}", top.join("  "));
            if let Some(ds) = &out.diff_scores {
                let v = ds.to_vec();
                let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                println!("[beta_diff] min {min:.4} max {max:.4}");
            }
        }
        let reply_ids = greedy_decode(
            &model.decoder,
            &model.encoder.embedding,
            &encoding.context,
            &encoding.candidates[out.chosen],
            &encoding.candidate_tokens[out.chosen],
            &encoding.candidate_ids[out.chosen],
            max_len,
        );
        let reply_tokens = vocab.decode(&reply_ids);
        let reply = if reply_tokens.is_empty() { "...".to_string() } else { reply_tokens.join(" ") };
        println!("{reply}");
        dialogue.turns.last_mut().expect("turn pushed above").response =
            if reply_tokens.is_empty() { vec!["...".into()] } else { reply_tokens };
    }
    println!("bye.");
    Ok(())
}
