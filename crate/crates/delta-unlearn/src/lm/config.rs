use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeTag {
    Large,
    Small,
}

impl std::fmt::Display for SizeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SizeTag::Large => write!(f, "large"),
            SizeTag::Small => write!(f, "small"),
        }
    }
}

/// Decoder-only transformer hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LMConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    pub vocab_size: usize,
    pub size_tag: SizeTag,
}

impl LMConfig {
    /// Default "large" role: ~4x the parameters of the small config.
    pub fn default_large(vocab_size: usize, max_seq_len: usize) -> Self {
        LMConfig {
            n_layers: 4,
            n_heads: 4,
            d_model: 128,
            d_ff: 256,
            max_seq_len,
            vocab_size,
            size_tag: SizeTag::Large,
        }
    }

    pub fn default_small(vocab_size: usize, max_seq_len: usize) -> Self {
        LMConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 64,
            d_ff: 128,
            max_seq_len,
            vocab_size,
            size_tag: SizeTag::Small,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.n_layers,
            self.n_heads,
            self.d_model,
            self.d_ff,
            self.max_seq_len,
            self.vocab_size,
        ];
        if positive.iter().any(|&v| v == 0) {
            return Err(Error::Config("all model extents must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let d = self.d_model;
        let per_layer = 2 * d + 4 * d * d + 2 * d + d * self.d_ff + self.d_ff + self.d_ff * d + d;
        self.vocab_size * d + self.max_seq_len * d + self.n_layers * per_layer + 2 * d + d * self.vocab_size
    }
}
