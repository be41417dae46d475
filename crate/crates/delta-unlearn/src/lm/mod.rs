//! Tokenizer, decoder-only transformer at two sizes, greedy generation,
//! and bit-exact checkpoint persistence.

pub mod checkpoint;
pub mod config;
pub mod generate;
pub mod model;
pub mod tokenizer;

pub use config::{LMConfig, SizeTag};
pub use generate::{argmax, greedy_generate, Scorer};
pub use model::{LanguageModel, RowSel};
pub use tokenizer::{Tokenizer, BOS, EOS, PAD, SEP};
