//! Corpus ingestion, tokenization, vocabulary, per-turn input assembly,
//! batching and synthetic task generation.

pub mod batch;
pub mod corpus;
pub mod embeddings;
pub mod prep;
pub mod synthetic;
pub mod tokenize;
pub mod vocab;

pub use batch::make_batches;
pub use corpus::{load_corpus, save_corpus, DataError, Dialogue, Turn};
pub use embeddings::apply_pretrained;
pub use prep::{assemble_context, prepare_candidates, CandidateSet, ContextWindow, LengthCaps};
pub use synthetic::{make_synthetic_context_corpus, make_synthetic_transition_corpus};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, EOS, EOS_TOKEN, PAD, PAD_TOKEN, SOS, SOS_TOKEN, UNK, UNK_TOKEN};
