//! Synthetic TOFU-analog benchmark: fictitious-author QA with forget and
//! retain splits, fixed control sets, paraphrases, perturbed wrong
//! answers, and ingestion of externally supplied files.

pub mod generate;
pub mod pools;
pub mod tofu;
pub mod types;

pub use generate::{abstention_for, generate_corpus, relabel_forget_set, AttrKind};
pub use tofu::{ingest_tofu_format, TofuPaths};
pub use types::{
    check_vocabulary, read_jsonl, AuthorProfile, DatasetSplits, QAExample, Subset,
};
