//! The four unlearning objectives, built on one tape over the trainable
//! model's parameters. Frozen-model contributions enter as constants
//! (from the frozen-logit cache), so gradients can only reach M'_o.

use crate::autodiff::{softmax, NodeId, Tape, Tensor};
use crate::corpus::QAExample;
use crate::ensemble::FrozenLogitCache;
use crate::error::{Error, Result};
use crate::lm::{LanguageModel, RowSel, Tokenizer, EOS};

/// One tokenized training example. `rows` are the positions whose
/// logits predict the answer tokens (EOS included, so the model learns
/// to stop); `targets[k]` is the token predicted from `rows[k]`.
#[derive(Debug, Clone)]
pub struct PreparedExample {
    pub id: String,
    pub ids: Vec<u32>,
    pub rows: Vec<usize>,
    pub targets: Vec<u32>,
    /// Offset mode: l_M − α·l_{M_o} at `rows`; the constant part of the
    /// ensemble logits. `None` trains on the model's own logits.
    pub const_rows: Option<Tensor>,
    /// Pre-unlearning distribution at `rows` (softmax of l_M), the KL
    /// anchor on retain examples.
    pub p_before: Option<Tensor>,
}

/// Tokenize a QA pair into training positions and targets.
pub fn prepare_example(tok: &Tokenizer, ex: &QAExample) -> Result<PreparedExample> {
    let q_ids = tok.encode(&ex.question)?;
    let a_ids = tok.encode(&ex.answer)?;
    if a_ids.is_empty() {
        return Err(Error::Contract(format!("example {:?} has an empty answer", ex.id)));
    }
    let ids = tok.encode_qa(&ex.question, &ex.answer)?;
    let sep = 1 + q_ids.len();
    let rows: Vec<usize> = (sep..=sep + a_ids.len()).collect();
    let mut targets = a_ids;
    targets.push(EOS);
    Ok(PreparedExample {
        id: ex.id.clone(),
        ids,
        rows,
        targets,
        const_rows: None,
        p_before: None,
    })
}

/// Attach the cached frozen contributions for offset-mode training.
/// `with_p_before` additionally stores softmax(l_M) for the KL anchor.
pub fn attach_frozen(
    pe: &mut PreparedExample,
    cache: &FrozenLogitCache,
    alpha: f64,
    with_p_before: bool,
) -> Result<()> {
    let entry = cache.get(&pe.id)?;
    if entry.rows != pe.rows {
        return Err(Error::StaleCache(format!(
            "cached rows for {:?} do not match the training rows",
            pe.id
        )));
    }
    let mut c = entry.base_rows.clone();
    for (v, &o) in c.data_mut().iter_mut().zip(entry.offset_rows.data()) {
        *v -= alpha * o;
    }
    pe.const_rows = Some(c);
    if with_p_before {
        let (n, vocab) = entry.base_rows.rows_cols();
        let mut p = Vec::with_capacity(n * vocab);
        for r in 0..n {
            p.extend(softmax(entry.base_rows.row(r)));
        }
        pe.p_before = Some(Tensor::new(vec![n, vocab], p)?);
    }
    Ok(())
}

/// Ensemble (or direct) logits for one example's training rows, as a
/// tape node: α·l_{M'_o} + (l_M − α·l_{M_o}), or the bare forward when
/// no constant part is attached.
pub fn example_logits(
    tape: &mut Tape,
    model: &LanguageModel,
    pe: &PreparedExample,
    alpha: f64,
) -> Result<NodeId> {
    let own = model.forward_graph(tape, &pe.ids, &RowSel::Rows(pe.rows.clone()))?;
    match &pe.const_rows {
        Some(c) => {
            let scaled = tape.scale(own, alpha);
            tape.add_const(scaled, c)
        }
        None => Ok(own),
    }
}

/// Mean over the batch of token-averaged negative log-likelihood. This
/// is the raw NLL: Gradient Ascent maximizes it (the training loop
/// minimizes its negation), plain fine-tuning minimizes it as is.
pub fn loss_ga(
    tape: &mut Tape,
    model: &LanguageModel,
    batch: &[&PreparedExample],
    alpha: f64,
) -> Result<NodeId> {
    if batch.is_empty() {
        return Err(Error::Contract("empty batch".into()));
    }
    let mut per_example = Vec::with_capacity(batch.len());
    for pe in batch {
        let logits = example_logits(tape, model, pe, alpha)?;
        per_example.push(tape.cross_entropy_rows(logits, &pe.targets)?);
    }
    tape.mean_scalars(&per_example)
}

/// Gradient Difference: minimize −L_forget + retain_weight·L_retain.
/// An empty retain batch degrades to plain Gradient Ascent, noted in
/// `warnings`.
pub fn loss_gd(
    tape: &mut Tape,
    model: &LanguageModel,
    forget: &[&PreparedExample],
    retain: &[&PreparedExample],
    alpha: f64,
    retain_weight: f64,
    warnings: &mut Vec<String>,
) -> Result<NodeId> {
    let f = loss_ga(tape, model, forget, alpha)?;
    let neg_f = tape.scale(f, -1.0);
    if retain.is_empty() {
        warnings.push("gradient difference with empty retain batch; falling back to gradient ascent".into());
        return Ok(neg_f);
    }
    let r = loss_ga(tape, model, retain, alpha)?;
    let weighted = tape.scale(r, retain_weight);
    tape.add(neg_f, weighted)
}

/// KL Minimization: minimize −L_forget + kl_weight·KL(P_before ‖ P_e)
/// averaged over retain examples (each example contributes the mean KL
/// over its answer rows).
pub fn loss_kl(
    tape: &mut Tape,
    model: &LanguageModel,
    forget: &[&PreparedExample],
    retain: &[&PreparedExample],
    alpha: f64,
    kl_weight: f64,
) -> Result<NodeId> {
    if retain.is_empty() {
        return Err(Error::Contract("kl minimization needs a retain batch".into()));
    }
    let f = loss_ga(tape, model, forget, alpha)?;
    let neg_f = tape.scale(f, -1.0);
    let mut kls = Vec::with_capacity(retain.len());
    for pe in retain {
        let p_before = pe.p_before.as_ref().ok_or_else(|| {
            Error::Contract(format!("example {:?} has no before-distribution cache", pe.id))
        })?;
        let logits = example_logits(tape, model, pe, alpha)?;
        kls.push(tape.kl_from_fixed(logits, p_before)?);
    }
    let kl = tape.mean_scalars(&kls)?;
    let weighted = tape.scale(kl, kl_weight);
    tape.add(neg_f, weighted)
}

/// Data Relabeling: ordinary NLL minimization on abstention answers.
/// Identical in form to [`loss_ga`]; callers prepare the batch from the
/// relabeled forget set.
pub fn loss_relabel(
    tape: &mut Tape,
    model: &LanguageModel,
    batch: &[&PreparedExample],
    alpha: f64,
) -> Result<NodeId> {
    loss_ga(tape, model, batch, alpha)
}
