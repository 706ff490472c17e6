//! Emoji-conditioned conversational response generation.
//!
//! The crate covers the whole pipeline: corpus construction from raw
//! conversation pairs, a small reverse-mode autodiff engine, the response
//! generator family (attention seq2seq, its latent-variable extension, and
//! the reward-trained variant), the emoji classifier used as reward and
//! evaluator, training loops, and the automatic evaluation protocol.

pub mod autodiff;
pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod models;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
