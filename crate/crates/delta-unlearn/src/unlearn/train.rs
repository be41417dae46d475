//! Training loops: the unlearning run over M'_o, the direct fine-tuning
//! comparison arm, plain fine-tuning (pretrain / memorize), and the
//! retraining baseline.

use super::loss::{
    attach_frozen, loss_ga, loss_gd, loss_kl, loss_relabel, prepare_example, PreparedExample,
};
use crate::autodiff::{Adam, Tape, Tensor};
use crate::corpus::{relabel_forget_set, DatasetSplits, QAExample, Subset};
use crate::ensemble::{build_frozen_cache, combine_logits, OffsetEnsemble, SeqSpec};
use crate::error::{Error, Result};
use crate::eval::{mean_rouge, subsample, TrajectoryPoint};
use crate::lm::checkpoint::serialize;
use crate::lm::{LanguageModel, RowSel, Scorer, Tokenizer};
use crate::rng::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    GradientAscent,
    GradientDifference,
    KlMinimization,
    DataRelabeling,
}

impl Algorithm {
    pub fn needs_retain(self) -> bool {
        matches!(self, Algorithm::GradientDifference | Algorithm::KlMinimization)
    }

    pub fn key(self) -> &'static str {
        match self {
            Algorithm::GradientAscent => "gradient_ascent",
            Algorithm::GradientDifference => "gradient_difference",
            Algorithm::KlMinimization => "kl_minimization",
            Algorithm::DataRelabeling => "data_relabeling",
        }
    }
}

/// Whether the objective steers the ensemble (training M'_o) or the
/// model's own logits (the direct fine-tuning baseline).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Offset,
    Direct,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct UnlearnConfig {
    pub algorithm: Algorithm,
    pub mode: Mode,
    pub epochs: usize,
    /// Scaled down automatically when the forget set is smaller.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub alpha_train: f64,
    pub retain_weight: f64,
    pub kl_weight: f64,
    pub seed: u64,
    /// Examples per subset in trajectory evaluations.
    pub trajectory_samples: usize,
    pub max_new_tokens: usize,
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        UnlearnConfig {
            algorithm: Algorithm::GradientAscent,
            mode: Mode::Offset,
            epochs: 5,
            batch_size: 32,
            learning_rate: 1e-3,
            alpha_train: 1.0,
            retain_weight: 1.0,
            kl_weight: 1.0,
            seed: 0,
            trajectory_samples: 20,
            max_new_tokens: 24,
        }
    }
}

impl UnlearnConfig {
    pub fn validate(&self) -> Result<()> {
        // 0 epochs is a legal no-op run, so epochs is not checked
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.alpha_train >= 0.0 && self.alpha_train.is_finite()) {
            return Err(Error::Config("alpha_train must be ≥ 0".into()));
        }
        if self.retain_weight < 0.0 || self.kl_weight < 0.0 {
            return Err(Error::Config("objective weights must be ≥ 0".into()));
        }
        if self.trajectory_samples == 0 {
            return Err(Error::Config("trajectory_samples must be positive".into()));
        }
        Ok(())
    }
}

/// Ensemble scorer over borrowed members; used for trajectory
/// evaluations mid-run without cloning parameter stores.
pub struct BorrowedEnsemble<'a> {
    pub base: &'a LanguageModel,
    pub offset_frozen: &'a LanguageModel,
    pub offset_trainable: &'a LanguageModel,
    pub alpha: f64,
}

impl Scorer for BorrowedEnsemble<'_> {
    fn vocab_size(&self) -> usize {
        self.base.config.vocab_size
    }

    fn max_seq_len(&self) -> usize {
        self.base
            .config
            .max_seq_len
            .min(self.offset_frozen.config.max_seq_len)
    }

    fn logits_rows(&self, ids: &[u32], rows: &RowSel) -> Result<Tensor> {
        let l_m = self.base.logits_rows(ids, rows)?;
        let l_p = self.offset_trainable.logits_rows(ids, rows)?;
        let l_o = self.offset_frozen.logits_rows(ids, rows)?;
        combine_logits(&l_m, &l_p, &l_o, self.alpha)
    }
}

pub struct UnlearnOutcome {
    /// The trained model: M'_o in offset mode, the fine-tuned copy of M
    /// in direct mode.
    pub model: LanguageModel,
    pub trajectory: Vec<TrajectoryPoint>,
    pub warnings: Vec<String>,
}

fn params_bit_equal(a: &LanguageModel, b: &LanguageModel) -> bool {
    a.params.len() == b.params.len()
        && a.params.iter().zip(b.params.iter()).all(|((_, x), (_, y))| {
            x.name == y.name
                && x.value.shape() == y.value.shape()
                && x.value
                    .data()
                    .iter()
                    .zip(y.value.data())
                    .all(|(p, q)| p.to_bits() == q.to_bits())
        })
}

/// One optimizer step on `model` for the given objective value.
/// Returns the loss value actually minimized.
fn minimize_step<F>(model: &mut LanguageModel, adam: &mut Adam, build: F) -> Result<f64>
where
    F: FnOnce(&mut Tape, &LanguageModel) -> Result<crate::autodiff::NodeId>,
{
    let (value, grads) = {
        let mut tape = Tape::new(&model.params, true);
        let loss = build(&mut tape, model)?;
        let v = tape.value(loss).item();
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {v}")));
        }
        tape.backward(loss)?;
        (v, tape.param_grads())
    };
    model.params.zero_grad();
    model.params.accumulate_grads(&grads, 1.0);
    adam.step(&mut model.params)?;
    Ok(value)
}

struct EvalSets<'a> {
    forget: Vec<&'a QAExample>,
    retain: Vec<&'a QAExample>,
    real: Vec<&'a QAExample>,
    world: Vec<&'a QAExample>,
}

impl<'a> EvalSets<'a> {
    fn new(splits: &'a DatasetSplits, samples: usize) -> Self {
        let cap = Some(samples);
        EvalSets {
            forget: subsample(splits.subset(Subset::Forget), cap),
            retain: subsample(splits.subset(Subset::Retain), cap),
            real: subsample(splits.subset(Subset::RealAnalog), cap),
            world: subsample(splits.subset(Subset::WorldAnalog), cap),
        }
    }

    fn point<S: Scorer + ?Sized>(
        &self,
        scorer: &S,
        tok: &Tokenizer,
        step: usize,
        loss: f64,
        max_new: usize,
    ) -> Result<TrajectoryPoint> {
        Ok(TrajectoryPoint {
            step,
            loss,
            forget_rouge: mean_rouge(scorer, tok, &self.forget, max_new)?,
            retain_rouge: mean_rouge(scorer, tok, &self.retain, max_new)?,
            real_rouge: mean_rouge(scorer, tok, &self.real, max_new)?,
            world_rouge: mean_rouge(scorer, tok, &self.world, max_new)?,
        })
    }
}

/// Shared epoch/batch loop over a prepared forget set (and optional
/// retain cycle). `frozen_ctx` carries the ensemble members for offset
/// mode; `None` trains on the model's own logits.
#[allow(clippy::too_many_arguments)]
fn objective_loop(
    mut model: LanguageModel,
    frozen_ctx: Option<(&LanguageModel, &LanguageModel)>,
    tok: &Tokenizer,
    splits: &DatasetSplits,
    cfg: &UnlearnConfig,
    forget: Vec<PreparedExample>,
    retain: Vec<PreparedExample>,
) -> Result<UnlearnOutcome> {
    let mut warnings = Vec::new();
    let mut adam = Adam::new(&model.params, cfg.learning_rate, (0.9, 0.999), 1e-8);
    let mut rng = Rng::new(cfg.seed).sub("batching");
    let eval_sets = EvalSets::new(splits, cfg.trajectory_samples);
    let alpha = match frozen_ctx {
        Some(_) => cfg.alpha_train,
        None => 0.0, // unused; examples carry no const part
    };

    let mut trajectory = Vec::new();
    let eval_point = |model: &LanguageModel, step: usize, loss: f64| -> Result<TrajectoryPoint> {
        match frozen_ctx {
            Some((base, frozen)) => {
                let scorer = BorrowedEnsemble {
                    base,
                    offset_frozen: frozen,
                    offset_trainable: model,
                    alpha: cfg.alpha_train,
                };
                eval_sets.point(&scorer, tok, step, loss, cfg.max_new_tokens)
            }
            None => eval_sets.point(model, tok, step, loss, cfg.max_new_tokens),
        }
    };
    trajectory.push(eval_point(&model, 0, 0.0)?);

    let batch = cfg.batch_size.min(forget.len()).max(1);
    let mut step = 0usize;
    let mut retain_cursor = 0usize;
    let mut retain_order: Vec<usize> = (0..retain.len()).collect();
    for _epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..forget.len()).collect();
        rng.shuffle(&mut order);
        let mut last_loss = 0.0;
        for chunk in order.chunks(batch) {
            let fb: Vec<&PreparedExample> = chunk.iter().map(|&i| &forget[i]).collect();
            // retain examples cycle in shuffled order, reshuffled per pass
            let rb: Vec<&PreparedExample> = if cfg.algorithm.needs_retain() && !retain.is_empty()
            {
                (0..fb.len())
                    .map(|_| {
                        if retain_cursor == 0 {
                            rng.shuffle(&mut retain_order);
                        }
                        let idx = retain_order[retain_cursor];
                        retain_cursor = (retain_cursor + 1) % retain.len();
                        &retain[idx]
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let mut batch_warnings = Vec::new();
            last_loss = minimize_step(&mut model, &mut adam, |tape, m| match cfg.algorithm {
                Algorithm::GradientAscent => {
                    let nll = loss_ga(tape, m, &fb, alpha)?;
                    Ok(tape.scale(nll, -1.0))
                }
                Algorithm::GradientDifference => loss_gd(
                    tape,
                    m,
                    &fb,
                    &rb,
                    alpha,
                    cfg.retain_weight,
                    &mut batch_warnings,
                ),
                Algorithm::KlMinimization => {
                    loss_kl(tape, m, &fb, &rb, alpha, cfg.kl_weight)
                }
                Algorithm::DataRelabeling => loss_relabel(tape, m, &fb, alpha),
            })?;
            if !batch_warnings.is_empty() && warnings.is_empty() {
                warnings.extend(batch_warnings);
            }
            step += 1;
        }
        trajectory.push(eval_point(&model, step, last_loss)?);
    }

    Ok(UnlearnOutcome {
        model,
        trajectory,
        warnings,
    })
}

/// Run one unlearning objective over the ensemble: only M'_o trains;
/// M and M_o must come out byte-identical.
pub fn unlearn_run(
    ens: &OffsetEnsemble,
    tok: &Tokenizer,
    splits: &DatasetSplits,
    cfg: &UnlearnConfig,
) -> Result<UnlearnOutcome> {
    cfg.validate()?;
    if cfg.mode != Mode::Offset {
        return Err(Error::Config(
            "unlearn_run is the offset arm; use direct_finetune_run for direct mode".into(),
        ));
    }
    if splits.forget.is_empty() {
        return Err(Error::Contract("empty forget set".into()));
    }
    if !params_bit_equal(&ens.offset_trainable, &ens.offset_frozen) {
        return Err(Error::Contract(
            "unlearning must start from M'_o == M_o (zero offset)".into(),
        ));
    }
    let base_before = serialize(&ens.base, &ens.tokenizer_digest);
    let frozen_before = serialize(&ens.offset_frozen, &ens.tokenizer_digest);

    let forget_src = if cfg.algorithm == Algorithm::DataRelabeling {
        relabel_forget_set(splits)?
    } else {
        splits.forget.clone()
    };
    let mut forget: Vec<PreparedExample> = forget_src
        .iter()
        .map(|ex| prepare_example(tok, ex))
        .collect::<Result<_>>()?;
    let mut retain: Vec<PreparedExample> = if cfg.algorithm.needs_retain() {
        splits
            .retain
            .iter()
            .map(|ex| prepare_example(tok, ex))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let seqs: Vec<SeqSpec> = forget
        .iter()
        .chain(retain.iter())
        .map(|pe| SeqSpec {
            id: pe.id.clone(),
            tokens: pe.ids.clone(),
            rows: pe.rows.clone(),
        })
        .collect();
    let cache = build_frozen_cache(ens, &seqs)?;
    cache.verify(ens)?;
    for pe in forget.iter_mut() {
        attach_frozen(pe, &cache, cfg.alpha_train, false)?;
    }
    let with_p_before = cfg.algorithm == Algorithm::KlMinimization;
    for pe in retain.iter_mut() {
        attach_frozen(pe, &cache, cfg.alpha_train, with_p_before)?;
    }

    let outcome = objective_loop(
        ens.offset_trainable.clone(),
        Some((&ens.base, &ens.offset_frozen)),
        tok,
        splits,
        cfg,
        forget,
        retain,
    )?;

    if serialize(&ens.base, &ens.tokenizer_digest) != base_before
        || serialize(&ens.offset_frozen, &ens.tokenizer_digest) != frozen_before
    {
        return Err(Error::Invariant(
            "frozen model weights changed during an unlearning run".into(),
        ));
    }
    Ok(outcome)
}

/// The comparison arm: the same objectives applied to a copy of M's own
/// logits. The canonical M is never touched.
pub fn direct_finetune_run(
    model: &LanguageModel,
    tok: &Tokenizer,
    splits: &DatasetSplits,
    cfg: &UnlearnConfig,
) -> Result<UnlearnOutcome> {
    cfg.validate()?;
    if cfg.mode != Mode::Direct {
        return Err(Error::Config("direct_finetune_run requires direct mode".into()));
    }
    if splits.forget.is_empty() {
        return Err(Error::Contract("empty forget set".into()));
    }
    let forget_src = if cfg.algorithm == Algorithm::DataRelabeling {
        relabel_forget_set(splits)?
    } else {
        splits.forget.clone()
    };
    let forget: Vec<PreparedExample> = forget_src
        .iter()
        .map(|ex| prepare_example(tok, ex))
        .collect::<Result<_>>()?;
    let mut retain: Vec<PreparedExample> = if cfg.algorithm.needs_retain() {
        splits
            .retain
            .iter()
            .map(|ex| prepare_example(tok, ex))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    // the KL anchor in direct mode is the model's own pre-unlearning
    // distribution on retain answer rows
    if cfg.algorithm == Algorithm::KlMinimization {
        for pe in retain.iter_mut() {
            let logits = model.logits_rows(&pe.ids, &RowSel::Rows(pe.rows.clone()))?;
            let (n, vocab) = logits.rows_cols();
            let mut p = Vec::with_capacity(n * vocab);
            for r in 0..n {
                p.extend(crate::autodiff::softmax(logits.row(r)));
            }
            pe.p_before = Some(Tensor::new(vec![n, vocab], p)?);
        }
    }
    let mut copy = model.clone();
    copy.frozen = false;
    objective_loop(copy, None, tok, splits, cfg, forget, retain)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

/// Plain NLL minimization over a set of QA examples; the pretrain,
/// memorize, and retraining stages. Returns mean loss per epoch.
pub fn finetune(
    model: &mut LanguageModel,
    tok: &Tokenizer,
    examples: &[QAExample],
    cfg: &FinetuneConfig,
) -> Result<Vec<f64>> {
    if examples.is_empty() {
        return Err(Error::Contract("fine-tuning on an empty set".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) || cfg.batch_size == 0 {
        return Err(Error::Config("invalid fine-tuning settings".into()));
    }
    if model.frozen {
        return Err(Error::Contract("fine-tuning a frozen model".into()));
    }
    let prepared: Vec<PreparedExample> = examples
        .iter()
        .map(|ex| prepare_example(tok, ex))
        .collect::<Result<_>>()?;
    let mut adam = Adam::new(&model.params, cfg.learning_rate, (0.9, 0.999), 1e-8);
    let mut rng = Rng::new(cfg.seed).sub("batching");
    let batch = cfg.batch_size.min(prepared.len()).max(1);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        let mut n = 0usize;
        for chunk in order.chunks(batch) {
            let b: Vec<&PreparedExample> = chunk.iter().map(|&i| &prepared[i]).collect();
            sum += minimize_step(model, &mut adam, |tape, m| loss_ga(tape, m, &b, 0.0))?;
            n += 1;
        }
        epoch_losses.push(sum / n as f64);
    }
    Ok(epoch_losses)
}

/// Fine-tune the pre-memorization base on everything except the forget
/// set. Its forget-set ROUGE is the matching target for unlearning.
/// `replay` carries whatever control material the memorize stage also
/// trained on, so target and memorized model differ only in S_f.
pub fn retrain_baseline(
    base: &LanguageModel,
    tok: &Tokenizer,
    splits: &DatasetSplits,
    replay: &[QAExample],
    cfg: &FinetuneConfig,
) -> Result<LanguageModel> {
    let mut examples: Vec<QAExample> = splits.retain.clone();
    examples.extend_from_slice(replay);
    let mut model = base.clone();
    model.frozen = false;
    finetune(&mut model, tok, &examples, cfg)?;
    Ok(model)
}
