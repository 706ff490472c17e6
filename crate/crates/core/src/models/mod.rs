//! Network architectures: GRU cells, bidirectional encoders, the emoji
//! embedding path, recognition/prior networks, the attention decoder, and
//! the skip-connected emoji classifier.

mod attention;
mod classifier;
mod decoder;
mod encoder;
mod gaussian;
mod generator;
mod gru;

pub use attention::attend;
pub use classifier::Classifier;
pub use decoder::{sample_from_logits, DecodeMode, Decoder, Rollout};
pub use encoder::{embed_rows, BiGruEncoder, Encoding};
pub use gaussian::{
    reparameterize, sample_standard_normal, GaussianNet, GaussianNodes, GaussianParams,
};
pub use generator::{BestOfK, Condition, Generation, Generator, TeacherDecode};
pub use gru::GruCell;

use serde::{Deserialize, Serialize};

use crate::corpus::LABEL_COUNT;
use crate::error::{Error, Result};

/// Hyper-parameters shared by the generator family and the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    /// Word (and emoji) embedding width.
    pub embed_dim: usize,
    /// GRU hidden width H; encoders emit 2H.
    pub hidden_dim: usize,
    /// Emoji embedding width before the reduction layer.
    pub emoji_embed_dim: usize,
    /// Reduced emoji representation width E.
    pub emoji_dim: usize,
    /// Latent width D.
    pub latent_dim: usize,
    /// Hidden width of the recognition/prior networks.
    pub mlp_hidden_dim: usize,
    /// Classifier dropout rate.
    pub dropout: f64,
}

impl ModelConfig {
    /// Reference scale: 128-dim embeddings and hidden units, emoji
    /// representation reduced to 12, latent width 268.
    pub fn reference(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 128,
            hidden_dim: 128,
            emoji_embed_dim: 128,
            emoji_dim: 12,
            latent_dim: 268,
            mlp_hidden_dim: 268,
            dropout: 0.2,
        }
    }

    /// A small configuration for tests and toy corpora.
    pub fn tiny(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            embed_dim: 16,
            hidden_dim: 16,
            emoji_embed_dim: 16,
            emoji_dim: 4,
            latent_dim: 8,
            mlp_hidden_dim: 16,
            dropout: 0.2,
        }
    }

    pub fn emoji_count(&self) -> usize {
        LABEL_COUNT
    }

    /// dim(c) = 2H + E.
    pub fn condition_dim(&self) -> usize {
        2 * self.hidden_dim + self.emoji_dim
    }

    /// dim([c; z]) = 2H + E + D.
    pub fn latent_condition_dim(&self) -> usize {
        self.condition_dim() + self.latent_dim
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.vocab_size,
            self.embed_dim,
            self.hidden_dim,
            self.emoji_embed_dim,
            self.emoji_dim,
            self.latent_dim,
            self.mlp_hidden_dim,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Response-generator variants. The classifier is a separate model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Base,
    Cvae,
    Reinforced,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Base => "base",
            ModelKind::Cvae => "cvae",
            ModelKind::Reinforced => "reinforced",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(ModelKind::Base),
            "cvae" => Ok(ModelKind::Cvae),
            "reinforced" => Ok(ModelKind::Reinforced),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }

    /// Does this kind carry the latent-variable machinery?
    pub fn is_latent(&self) -> bool {
        matches!(self, ModelKind::Cvae | ModelKind::Reinforced)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}
