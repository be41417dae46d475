use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::lm::model::{LanguageModel, RowSel};
use crate::lm::tokenizer::EOS;

/// Anything that can produce next-token logits: a bare model or the
/// offset ensemble.
pub trait Scorer: Sync {
    fn vocab_size(&self) -> usize;
    fn max_seq_len(&self) -> usize;
    /// Logits for the selected rows, shape [rows, vocab].
    fn logits_rows(&self, ids: &[u32], rows: &RowSel) -> Result<Tensor>;
}

impl Scorer for LanguageModel {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn max_seq_len(&self) -> usize {
        self.config.max_seq_len
    }

    fn logits_rows(&self, ids: &[u32], rows: &RowSel) -> Result<Tensor> {
        LanguageModel::logits_rows(self, ids, rows)
    }
}

/// Greedy argmax over one logit row; ties break toward the lowest id.
pub fn argmax(logits: &[f64]) -> u32 {
    let mut best = 0usize;
    let mut best_v = logits[0];
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best as u32
}

/// Append argmax tokens until EOS or `max_new`. Returns the generated
/// continuation, excluding the prompt and the EOS token.
pub fn greedy_generate<S: Scorer + ?Sized>(
    scorer: &S,
    prompt: &[u32],
    max_new: usize,
) -> Result<Vec<u32>> {
    if prompt.is_empty() {
        return Err(Error::Contract("empty prompt".into()));
    }
    let mut ids = prompt.to_vec();
    let mut out = Vec::new();
    for _ in 0..max_new {
        if ids.len() >= scorer.max_seq_len() {
            break;
        }
        let logits = scorer.logits_rows(&ids, &RowSel::Last)?;
        let next = argmax(logits.data());
        if next == EOS {
            break;
        }
        ids.push(next);
        out.push(next);
    }
    Ok(out)
}
