//! Offset unlearning for a frozen "large" language model: a trainable /
//! frozen pair of small offset models supplies a logit correction that
//! steers the large model away from a forget set without touching its
//! weights. Includes a synthetic fictitious-author QA benchmark, four
//! unlearning objectives, and the ROUGE / probability / truth-ratio
//! metric suite.

pub mod autodiff;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod lm;
pub mod pipeline;
pub mod rng;
pub mod unlearn;

pub use error::{Error, Result};
