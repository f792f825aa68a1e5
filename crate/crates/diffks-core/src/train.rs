//! The training loop: shuffle, batch, accumulate per-dialogue gradients,
//! clip, step Adam, evaluate on dev, log one structured line per epoch, and
//! keep the checkpoint with the best dev BLEU-4.

use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
use crate::config::{Config, ConfigError, StopMetric};
use crate::data::{make_batches, DataError, Dialogue, Vocabulary};
use crate::eval::evaluate_model;
use crate::model::{build_groups, ModelParams};
use crate::optim::{Adam, OptimError};
use crate::rng::{stream, Purpose};
use crate::rollout::{compute_total_loss, forward_dialogue};
use crate::selector::Mode;

#[derive(Debug)]
pub enum TrainError {
    Config(ConfigError),
    Data(DataError),
    Optim(OptimError),
    Checkpoint(CheckpointError),
    Io(String),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::Config(e) => write!(f, "{e}"),
            TrainError::Data(e) => write!(f, "{e}"),
            TrainError::Optim(e) => write!(f, "{e}"),
            TrainError::Checkpoint(e) => write!(f, "{e}"),
            TrainError::Io(m) => write!(f, "train io error: {m}"),
        }
    }
}

impl std::error::Error for TrainError {}

impl From<ConfigError> for TrainError {
    fn from(e: ConfigError) -> Self {
        TrainError::Config(e)
    }
}
impl From<DataError> for TrainError {
    fn from(e: DataError) -> Self {
        TrainError::Data(e)
    }
}
impl From<OptimError> for TrainError {
    fn from(e: OptimError) -> Self {
        TrainError::Optim(e)
    }
}
impl From<CheckpointError> for TrainError {
    fn from(e: CheckpointError) -> Self {
        TrainError::Checkpoint(e)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-dialogue total loss.
    pub train_loss: f64,
    pub train_nll: f64,
    pub train_ks: f64,
    /// Mean NLL per target token.
    pub token_nll: f64,
    pub dev_acc: f64,
    pub dev_acc_later_turns: f64,
    pub dev_bleu2: f64,
    pub dev_bleu4: f64,
    pub dev_rouge2: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_bleu4: f64,
    pub best_dev_acc: f64,
    pub best_dev_acc_later_turns: f64,
    pub n_params: usize,
    pub stopped_early: bool,
    pub epoch_logs: Vec<EpochLog>,
    pub best_checkpoint: PathBuf,
}

/// Train on `corpus`, selecting the checkpoint by dev BLEU-4. `resume`
/// restarts from a saved checkpoint: its config, vocabulary, parameters and
/// optimizer state take over, and epochs continue where it left off.
pub fn train(
    config: &Config,
    corpus: &[Dialogue],
    dev_corpus: &[Dialogue],
    run_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if corpus.is_empty() || dev_corpus.is_empty() {
        return Err(TrainError::Data(DataError::EmptyCorpus));
    }
    std::fs::create_dir_all(run_dir).map_err(|e| TrainError::Io(e.to_string()))?;

    let (config, vocab, model, mut groups, mut adam, start_epoch) = match resume {
        Some(path) => {
            let loaded = load_checkpoint(path)?;
            let mut adam = Adam::new(loaded.config.train.learning_rate);
            adam.step = loaded.adam_step;
            (loaded.config, loaded.vocab, loaded.model, loaded.groups, adam, loaded.epoch as usize + 1)
        }
        None => {
            let vocab = Vocabulary::build(corpus, config.data.vocab_cap);
            let mut init_rng = stream(config.train.seed, Purpose::Init, 0);
            let model = ModelParams::init(config, &vocab, &mut init_rng);
            if let Some(file) = &config.data.embedding_file {
                model.load_pretrained_embeddings(&vocab, config.model.embedding_dim, Path::new(file))?;
            }
            let groups = build_groups(&model);
            let adam = Adam::new(config.train.learning_rate);
            (config.clone(), vocab, model, groups, adam, 1)
        }
    };
    let seed = config.train.seed;

    vocab
        .save(&run_dir.join("vocab.txt"))
        .map_err(|e| TrainError::Io(e.to_string()))?;
    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(run_dir.join("log"))
        .map_err(|e| TrainError::Io(e.to_string()))?;
    let n_params = model.n_params();
    writeln!(
        log,
        "{}",
        serde_json::json!({"event": "config", "n_params": n_params, "config": &config})
    )
    .map_err(|e| TrainError::Io(e.to_string()))?;

    let mut outcome = TrainOutcome {
        epochs_run: 0,
        best_epoch: 0,
        best_bleu4: f64::NEG_INFINITY,
        best_dev_acc: 0.0,
        best_dev_acc_later_turns: 0.0,
        n_params,
        stopped_early: false,
        epoch_logs: Vec::new(),
        best_checkpoint: run_dir.join("best.ckpt"),
    };

    for epoch in start_epoch..=config.train.epochs {
        let t0 = Instant::now();
        let mut shuffle_rng = stream(seed, Purpose::Shuffle, epoch as u64);
        let mut dropout_rng = stream(seed, Purpose::Dropout, epoch as u64);
        let batches = make_batches(corpus, config.train.batch_size, &mut shuffle_rng)?;

        let mut loss_sum = 0.0;
        let mut nll_sum = 0.0;
        let mut ks_sum = 0.0;
        let mut token_count = 0usize;
        for batch in &batches {
            for &idx in batch {
                let records = forward_dialogue(
                    &model,
                    &vocab,
                    &corpus[idx],
                    &config,
                    Mode::Train,
                    config.eval.history,
                    &mut dropout_rng,
                );
                let (nll, ks, total) = compute_total_loss(&records, config.train.ks_weight);
                // mean over the batch: scale each dialogue's contribution
                total.scale(1.0 / batch.len() as f64).backward();
                loss_sum += total.value();
                nll_sum += nll.value();
                ks_sum += ks.value();
                token_count += records.iter().map(|r| r.n_targets).sum::<usize>();
            }
            Adam::clip_global_norm(&groups, config.train.grad_clip);
            adam.step(&mut groups)?;
        }

        let report = evaluate_model(&model, &vocab, dev_corpus, &config, config.eval.history);
        let n = corpus.len() as f64;
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / n,
            train_nll: nll_sum / n,
            train_ks: ks_sum / n,
            token_nll: nll_sum / token_count.max(1) as f64,
            dev_acc: report.acc,
            dev_acc_later_turns: report.acc_from_turn(2),
            dev_bleu2: report.bleu2,
            dev_bleu4: report.bleu4,
            dev_rouge2: report.rouge2,
            seconds: t0.elapsed().as_secs_f64(),
        };
        writeln!(log, "{}", serde_json::to_string(&entry).map_err(|e| TrainError::Io(e.to_string()))?)
            .map_err(|e| TrainError::Io(e.to_string()))?;

        outcome.epochs_run += 1;
        outcome.best_dev_acc = outcome.best_dev_acc.max(report.acc);
        outcome.best_dev_acc_later_turns = outcome.best_dev_acc_later_turns.max(entry.dev_acc_later_turns);
        if report.bleu4 > outcome.best_bleu4 {
            outcome.best_bleu4 = report.bleu4;
            outcome.best_epoch = epoch;
            save_checkpoint(&run_dir.join("best.ckpt"), &config, &vocab, &groups, &adam, epoch as u64)?;
        }

        let any_target = config.train.stop_at_dev_acc.is_some() || config.train.stop_at_token_nll.is_some();
        let acc_ok = config.train.stop_at_dev_acc.is_none_or(|target| {
            let metric = match config.train.stop_metric {
                StopMetric::Acc => report.acc,
                StopMetric::AccLaterTurns => entry.dev_acc_later_turns,
            };
            metric >= target
        });
        let nll_ok = config.train.stop_at_token_nll.is_none_or(|target| entry.token_nll < target);
        let stop = any_target && acc_ok && nll_ok;
        let last = epoch == config.train.epochs || stop;
        if epoch % config.train.checkpoint_every == 0 || last {
            save_checkpoint(
                &run_dir.join(format!("epoch-{epoch}.ckpt")),
                &config,
                &vocab,
                &groups,
                &adam,
                epoch as u64,
            )?;
        }
        outcome.epoch_logs.push(entry);
        if stop {
            outcome.stopped_early = true;
            break;
        }
    }
    Ok(outcome)
}
