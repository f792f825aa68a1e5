//! Shared fixtures for the criterion benchmarks.

use diffks_core::config::Config;
use diffks_core::data::{make_synthetic_transition_corpus, Dialogue, Vocabulary};
use diffks_core::model::ModelParams;
use diffks_core::rng::{stream, Purpose};

/// A small but realistic model plus one dialogue for forward benchmarks.
pub fn bench_fixture() -> (Config, Vocabulary, ModelParams, Dialogue) {
    let mut config = Config::default();
    config.model.embedding_dim = 32;
    config.model.hidden_size = 32;
    config.model.decoder_hidden = 64;
    config.train.dropout = 0.0;
    config.data.vocab_cap = 200;
    config.eval.max_decode_len = 8;
    let corpus = make_synthetic_transition_corpus(5, 8, 4, 42);
    let vocab = Vocabulary::build(&corpus, config.data.vocab_cap);
    let model = ModelParams::init(&config, &vocab, &mut stream(1, Purpose::Init, 0));
    let dialogue = corpus.into_iter().next().expect("non-empty corpus");
    (config, vocab, model, dialogue)
}
