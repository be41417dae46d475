//! Unlearning objectives, training loops, baselines, and the
//! learning-rate search that matches the retraining target.

pub mod loss;
pub mod search;
pub mod train;

pub use loss::{
    attach_frozen, example_logits, loss_ga, loss_gd, loss_kl, loss_relabel, prepare_example,
    PreparedExample,
};
pub use search::{match_target_by_lr, LrSearchOutcome, DEFAULT_TOLERANCE, MAX_SEARCH_RUNS};
pub use train::{
    direct_finetune_run, finetune, retrain_baseline, unlearn_run, Algorithm, BorrowedEnsemble,
    FinetuneConfig, Mode, UnlearnConfig, UnlearnOutcome,
};
