//! Operator surface: training, evaluation, gradient checking, synthetic
//! corpus generation, and an interactive chat loop over a checkpoint.
//!
//! Exit codes: 0 success, 2 configuration/usage error, 3 data or checkpoint
//! mismatch, 4 numerical failure.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "diffks", version, about = "Difference-aware knowledge selection for dialogue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and keep the best-BLEU-4 checkpoint.
    Train {
        /// TOML configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Directory holding the train/dev corpus files named in the config.
        #[arg(long)]
        data_dir: PathBuf,
        /// Output directory for checkpoints and the log.
        #[arg(long)]
        run_dir: PathBuf,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's epoch count.
        #[arg(long)]
        epochs: Option<usize>,
        /// Resume from a checkpoint (its config and state take over).
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a corpus and emit a report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// History fed back during the rollout: gold or predicted.
        #[arg(long)]
        history: Option<String>,
        /// Print the accuracy-by-turn table.
        #[arg(long)]
        per_turn: bool,
        /// Where to write the JSON report.
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Compare reverse-mode gradients against finite differences.
    Gradcheck {
        /// op, module, end2end, or all.
        #[arg(long, default_value = "all")]
        scale: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Generate a synthetic corpus.
    Synth {
        /// transition or context.
        #[arg(long)]
        kind: String,
        /// Knowledge pool size (at least 2).
        #[arg(long)]
        k: usize,
        /// Number of dialogues.
        #[arg(long)]
        n: usize,
        /// Turns per dialogue (at least 2).
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chat with a checkpoint over a fixed knowledge pool.
    Chat {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Text file with one knowledge sentence per line.
        #[arg(long)]
        knowledge: PathBuf,
        /// Print the selected sentence and the top selection scores.
        #[arg(long)]
        show_selection: bool,
        /// Reply length cap.
        #[arg(long, default_value_t = 30)]
        max_len: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, data_dir, run_dir, seed, epochs, resume } => {
            commands::train(&config, &data_dir, &run_dir, seed, epochs, resume.as_deref())
        }
        Command::Eval { checkpoint, corpus, history, per_turn, out } => {
            commands::eval(&checkpoint, &corpus, history.as_deref(), per_turn, &out)
        }
        Command::Gradcheck { scale, seed } => commands::gradcheck(&scale, seed),
        Command::Synth { kind, k, n, t, seed, out } => commands::synth(&kind, k, n, t, seed, &out),
        Command::Chat { checkpoint, knowledge, show_selection, max_len } => {
            commands::chat(&checkpoint, &knowledge, show_selection, max_len)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
