//! Difference-aware knowledge selection for multi-turn knowledge-grounded
//! dialogue, from scratch: a small reverse-mode autodiff engine, BiGRU
//! encoders, fused/disentangled difference-aware selectors, a copy-augmented
//! GRU decoder, and the training/evaluation harness around them.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod decoder;
pub mod encoder;
pub mod eval;
pub mod gradcheck;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod rollout;
pub mod selector;
pub mod tensor;
pub mod train;

pub use config::Config;
pub use model::ModelParams;
pub use selector::Mode;
pub use tensor::{concat, copy_softmax, dropout, masked_softmax, Tensor};
