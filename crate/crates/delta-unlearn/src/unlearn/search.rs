//! Learning-rate matching: find the lr whose final forget-set ROUGE
//! lands on the retraining baseline's, keeping epochs fixed.

use super::train::{unlearn_run, BorrowedEnsemble, UnlearnConfig};
use crate::corpus::DatasetSplits;
use crate::ensemble::OffsetEnsemble;
use crate::error::{Error, Result};
use crate::eval::{mean_rouge, subsample};
use crate::lm::Tokenizer;

pub const DEFAULT_TOLERANCE: f64 = 0.03;
pub const MAX_SEARCH_RUNS: usize = 12;

#[derive(Debug, Clone)]
pub struct LrSearchOutcome {
    pub config: UnlearnConfig,
    /// Final forget ROUGE at the chosen lr.
    pub achieved: f64,
    /// Every (lr, final forget ROUGE) trial, in execution order.
    pub trials: Vec<(f64, f64)>,
    pub warning: Option<String>,
}

/// Geometric bracketing then bisection on log₁₀(lr). Forget ROUGE is
/// assumed to fall as lr grows — locally, not globally; a trial that
/// breaks the trend is reported, not fatal.
pub fn match_target_by_lr(
    ens: &OffsetEnsemble,
    tok: &Tokenizer,
    splits: &DatasetSplits,
    base_cfg: &UnlearnConfig,
    target: f64,
    tolerance: f64,
    bounds: (f64, f64),
) -> Result<LrSearchOutcome> {
    let (lo_bound, hi_bound) = bounds;
    if !(lo_bound > 0.0 && hi_bound > lo_bound) {
        return Err(Error::Config(format!("bad lr bounds {bounds:?}")));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Config(format!("target ROUGE {target} outside [0,1]")));
    }

    // pre-unlearning score: the zero-effect upper end of what any lr
    // can leave in place
    let scorer = BorrowedEnsemble {
        base: &ens.base,
        offset_frozen: &ens.offset_frozen,
        offset_trainable: &ens.offset_trainable,
        alpha: base_cfg.alpha_train,
    };
    let eval_set = subsample(&splits.forget, Some(base_cfg.trajectory_samples));
    let r0 = mean_rouge(&scorer, tok, &eval_set, base_cfg.max_new_tokens)?;
    if target >= r0 - tolerance {
        return Ok(LrSearchOutcome {
            config: UnlearnConfig {
                learning_rate: lo_bound,
                ..base_cfg.clone()
            },
            achieved: r0,
            trials: vec![],
            warning: Some(format!(
                "target {target:.3} is at or above the pre-unlearning score {r0:.3}; returning the zero-effect lower bound"
            )),
        });
    }

    let mut trials: Vec<(f64, f64)> = Vec::new();
    let mut warning = None;
    let trial = |lr: f64, trials: &mut Vec<(f64, f64)>| -> Result<f64> {
        let cfg = UnlearnConfig {
            learning_rate: lr,
            ..base_cfg.clone()
        };
        let outcome = unlearn_run(ens, tok, splits, &cfg)?;
        let rouge = outcome
            .trajectory
            .last()
            .map(|p| p.forget_rouge)
            .unwrap_or(r0);
        trials.push((lr, rouge));
        Ok(rouge)
    };

    let done = |lr: f64, r: f64, trials: Vec<(f64, f64)>, warning: Option<String>| {
        Ok(LrSearchOutcome {
            config: UnlearnConfig {
                learning_rate: lr,
                ..base_cfg.clone()
            },
            achieved: r,
            trials,
            warning,
        })
    };

    // bracketing: decade steps up from the lower bound until the score
    // crosses below the target
    let mut lo = (lo_bound, r0); // score still above target
    let mut hi: Option<(f64, f64)> = None; // score at or below target
    let mut lr = lo_bound;
    let mut prev_r = r0;
    while trials.len() < MAX_SEARCH_RUNS {
        let r = trial(lr, &mut trials)?;
        if (r - target).abs() <= tolerance {
            return done(lr, r, trials, warning);
        }
        if r > prev_r + 0.1 {
            warning = Some(format!(
                "forget ROUGE rose from {prev_r:.3} to {r:.3} as lr grew to {lr:.2e}; local monotonicity violated"
            ));
        }
        prev_r = r;
        if r < target {
            hi = Some((lr, r));
            break;
        }
        lo = (lr, r);
        if lr >= hi_bound {
            break;
        }
        lr = (lr * 10.0).min(hi_bound);
    }
    let Some(mut hi) = hi else {
        // even the upper bound undershoots the drop: nothing in bounds
        // reaches the target
        return Err(Error::SearchFailure { table: trials });
    };

    if hi.0 <= lo.0 {
        // already overshot at the lower bound; no bracket to bisect
        return done(
            hi.0,
            hi.1,
            trials,
            Some(format!(
                "lr lower bound {lo_bound:.2e} already drops forget ROUGE to {:.3}, past target {target:.3}",
                hi.1
            )),
        );
    }

    // bisection on log10(lr) inside [lo, hi]
    while trials.len() < MAX_SEARCH_RUNS {
        let mid = 10f64.powf((lo.0.log10() + hi.0.log10()) / 2.0);
        let r = trial(mid, &mut trials)?;
        if (r - target).abs() <= tolerance {
            return done(mid, r, trials, warning);
        }
        if r > target {
            lo = (mid, r);
        } else {
            hi = (mid, r);
        }
    }

    // budget exhausted: hand back the closest trial, flagged
    let (best_lr, best_r) = trials
        .iter()
        .copied()
        .min_by(|a, b| {
            (a.1 - target)
                .abs()
                .partial_cmp(&(b.1 - target).abs())
                .unwrap()
        })
        .unwrap();
    let note = format!(
        "run budget {MAX_SEARCH_RUNS} exhausted; best trial lr {best_lr:.2e} reached {best_r:.3} vs target {target:.3}"
    );
    done(
        best_lr,
        best_r,
        trials,
        Some(match warning {
            Some(w) => format!("{w}; {note}"),
            None => note,
        }),
    )
}
