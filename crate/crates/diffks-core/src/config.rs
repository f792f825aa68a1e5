//! Run configuration: TOML file, defaults matching the reference
//! hyperparameters, validation before anything touches data.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorVariant {
    Fused,
    Disentangled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    None,
    NoDiffsel,
    NoCtxsel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMetric {
    /// Overall dev selection accuracy.
    Acc,
    /// Dev selection accuracy over turns 2 and later, where sequential
    /// selection actually has history to work with.
    AccLaterTurns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistorySource {
    /// Feed the model's own selections back as history (true sequential
    /// inference; the default).
    Predicted,
    /// Feed the annotated selections back as history.
    Gold,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    /// Encoder hidden size per direction; summaries are twice this.
    pub hidden_size: usize,
    pub decoder_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { embedding_dim: 300, hidden_size: 200, decoder_hidden: 400 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorConfig {
    pub variant: SelectorVariant,
    pub ablation: Ablation,
    /// How many previous turns of selected knowledge feed the difference.
    #[serde(rename = "M")]
    pub m: usize,
    /// Mixing weights over the M history entries, newest first. Empty means
    /// the arithmetic average 1/M.
    pub lambda: Vec<f64>,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        SelectorConfig {
            variant: SelectorVariant::Fused,
            ablation: Ablation::None,
            m: 1,
            lambda: Vec::new(),
        }
    }
}

impl SelectorConfig {
    /// Effective weights: configured, or uniform 1/M.
    pub fn weights(&self) -> Vec<f64> {
        if self.lambda.is_empty() {
            vec![1.0 / self.m as f64; self.m]
        } else {
            self.lambda.clone()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Dropout on word embeddings, training mode only.
    pub dropout: f64,
    /// Weight on the knowledge-selection loss term.
    pub ks_weight: f64,
    pub grad_clip: f64,
    pub seed: u64,
    /// Write epoch-{n}.ckpt every this many epochs (best/last always kept).
    pub checkpoint_every: usize,
    /// Stop once the dev stop metric reaches this value, if set.
    pub stop_at_dev_acc: Option<f64>,
    /// Additionally require the train NLL per target token to fall below
    /// this before stopping, if set.
    pub stop_at_token_nll: Option<f64>,
    /// Which dev accuracy the early stop compares against.
    pub stop_metric: StopMetric,
    /// Numeric precision of the engine. Only "f64" is built.
    pub precision: String,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            learning_rate: 0.0005,
            batch_size: 8,
            epochs: 20,
            dropout: 0.5,
            ks_weight: 1.0,
            grad_clip: 5.0,
            seed: 7,
            checkpoint_every: 1,
            stop_at_dev_acc: None,
            stop_at_token_nll: None,
            stop_metric: StopMetric::Acc,
            precision: "f64".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Most frequent tokens kept; specials come on top of this.
    pub vocab_cap: usize,
    pub context_cap: usize,
    pub response_cap: usize,
    pub knowledge_len_cap: usize,
    pub pool_cap: usize,
    pub train_file: String,
    pub dev_file: String,
    /// Optional word2vec/GloVe-style text file to initialize embeddings.
    pub embedding_file: Option<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            vocab_cap: 20_000,
            context_cap: 100,
            response_cap: 50,
            knowledge_len_cap: 40,
            pool_cap: 40,
            train_file: "train.jsonl".to_string(),
            dev_file: "dev.jsonl".to_string(),
            embedding_file: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub history: HistorySource,
    pub max_decode_len: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { history: HistorySource::Predicted, max_decode_len: 50 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    pub selector: SelectorConfig,
    pub train: TrainSection,
    pub data: DataSection,
    pub eval: EvalSection,
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "config io error: {m}"),
            ConfigError::Parse(m) => write!(f, "config parse error: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        let cfg: Config = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.model.embedding_dim == 0 || self.model.hidden_size == 0 || self.model.decoder_hidden == 0 {
            return bad("model dimensions must be positive".into());
        }
        if self.selector.m == 0 {
            return bad("selector.M must be at least 1".into());
        }
        if !self.selector.lambda.is_empty() {
            if self.selector.lambda.len() != self.selector.m {
                return bad(format!(
                    "selector.lambda has {} entries but selector.M = {}",
                    self.selector.lambda.len(),
                    self.selector.m
                ));
            }
            if self.selector.lambda.iter().any(|&l| l < 0.0) {
                return bad("selector.lambda entries must be nonnegative".into());
            }
            let s: f64 = self.selector.lambda.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return bad(format!("selector.lambda must sum to 1, got {s}"));
            }
        }
        if self.selector.ablation != Ablation::None && self.selector.variant != SelectorVariant::Disentangled {
            return bad("selector.ablation requires the disentangled variant".into());
        }
        if self.train.learning_rate <= 0.0 {
            return bad("train.learning_rate must be positive".into());
        }
        if self.train.batch_size == 0 || self.train.epochs == 0 {
            return bad("train.batch_size and train.epochs must be positive".into());
        }
        if !(0.0..1.0).contains(&self.train.dropout) {
            return bad(format!("train.dropout {} outside [0,1)", self.train.dropout));
        }
        if self.train.ks_weight < 0.0 {
            return bad("train.ks_weight must be nonnegative".into());
        }
        if self.train.grad_clip <= 0.0 {
            return bad("train.grad_clip must be positive".into());
        }
        if self.train.precision != "f64" {
            return bad(format!(
                "train.precision \"{}\" is not available; this build computes in f64",
                self.train.precision
            ));
        }
        if self.data.vocab_cap == 0 {
            return bad("data.vocab_cap must be at least 1".into());
        }
        if self.data.context_cap == 0 || self.data.response_cap == 0 || self.data.knowledge_len_cap == 0 {
            return bad("data length caps must be positive".into());
        }
        if self.data.pool_cap < 2 {
            return bad("data.pool_cap must be at least 2 (the empty sentence plus one candidate)".into());
        }
        if self.eval.max_decode_len == 0 {
            return bad("eval.max_decode_len must be positive".into());
        }
        Ok(())
    }
}
