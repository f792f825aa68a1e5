//! The full parameter set and its registry for the optimizer and
//! checkpoints.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::Config;
use crate::data::{apply_pretrained, DataError, Vocabulary};
use crate::decoder::DecoderParams;
use crate::encoder::{BiGruParams, EncoderParams};
use crate::selector::SelectorParams;
use crate::tensor::Tensor;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub encoder: EncoderParams,
    pub selector: SelectorParams,
    pub decoder: DecoderParams,
}

impl ModelParams {
    /// Fresh parameters: Glorot matrices, zero biases, standard-normal
    /// embeddings (optionally overlaid with pretrained vectors).
    pub fn init<R: Rng>(config: &Config, vocab: &Vocabulary, rng: &mut R) -> ModelParams {
        let e = config.model.embedding_dim;
        let h = config.model.hidden_size;
        let d = config.model.decoder_hidden;
        let v = vocab.len();
        let emb: Vec<f64> = (0..v * e).map(|_| rng.sample(StandardNormal)).collect();
        ModelParams {
            encoder: EncoderParams {
                embedding: Tensor::param(emb, &[v, e]),
                context: BiGruParams::init(e, h, rng),
                knowledge: BiGruParams::init(e, h, rng),
                correlation: BiGruParams::init(2 * h, h, rng),
            },
            selector: SelectorParams::init(h, rng),
            decoder: DecoderParams::init(v, e, h, d, rng),
        }
    }

    pub fn load_pretrained_embeddings(
        &self,
        vocab: &Vocabulary,
        dim: usize,
        path: &Path,
    ) -> Result<usize, DataError> {
        let mut table = self.encoder.embedding.to_vec();
        let loaded = apply_pretrained(&mut table, vocab, dim, path)?;
        self.encoder.embedding.set_values(&table);
        Ok(loaded)
    }

    /// Every trainable tensor with a unique name, in a fixed order.
    pub fn named(&self) -> Vec<(String, Tensor)> {
        let mut v = self.encoder.named();
        v.extend(self.selector.named());
        v.extend(self.decoder.named());
        v
    }

    pub fn find(&self, name: &str) -> Option<Tensor> {
        self.named().into_iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn n_params(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn vocab_size(&self) -> usize {
        self.encoder.embedding.shape()[0]
    }
}

/// One tensor plus its optimizer slots.
#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub tensor: Tensor,
    pub moment1: Vec<f64>,
    pub moment2: Vec<f64>,
    /// Frozen entries keep their values through optimizer steps.
    pub frozen: bool,
}

impl ParamEntry {
    fn new(name: String, tensor: Tensor) -> ParamEntry {
        let n = tensor.len();
        ParamEntry { name, tensor, moment1: vec![0.0; n], moment2: vec![0.0; n], frozen: false }
    }
}

#[derive(Debug, Clone)]
pub struct ParamGroup {
    pub name: String,
    pub entries: Vec<ParamEntry>,
}

/// Group the model's tensors for optimization: embeddings, encoder stack,
/// selector, decoder.
pub fn build_groups(model: &ModelParams) -> Vec<ParamGroup> {
    let mut embedding = Vec::new();
    let mut encoder = Vec::new();
    let mut selector = Vec::new();
    let mut decoder = Vec::new();
    for (name, tensor) in model.named() {
        let entry = ParamEntry::new(name.clone(), tensor);
        if name == "embedding" {
            embedding.push(entry);
        } else if name.starts_with("encoder.") {
            encoder.push(entry);
        } else if name.starts_with("selector.") {
            selector.push(entry);
        } else {
            decoder.push(entry);
        }
    }
    vec![
        ParamGroup { name: "embedding".into(), entries: embedding },
        ParamGroup { name: "encoder".into(), entries: encoder },
        ParamGroup { name: "selector".into(), entries: selector },
        ParamGroup { name: "decoder".into(), entries: decoder },
    ]
}

pub fn zero_all_grads(groups: &[ParamGroup]) {
    for g in groups {
        for e in &g.entries {
            e.tensor.zero_grad();
        }
    }
}
