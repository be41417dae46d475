//! The offset ensemble: a frozen large model steered by the logit
//! difference of a frozen/trainable pair of small models,
//! l_e = l_M + α·(l_{M'_o} − l_{M_o}).

pub mod cache;

pub use cache::{build_frozen_cache, FrozenLogitCache, SeqSpec};

use crate::autodiff::{softmax, Tensor};
use crate::error::{Error, Result};
use crate::lm::checkpoint::{model_digest, LoadedCheckpoint};
use crate::lm::{LanguageModel, RowSel, Scorer};

/// l_M + α·(l_{M'_o} − l_{M_o}), elementwise.
///
/// The α = 0 and zero-difference cases return l_M's bits unchanged, so
/// the ensemble is exactly transparent at initialization (no −0.0 or
/// rounding artifacts from evaluating the full expression).
pub fn combine_logits(
    l_m: &Tensor,
    l_mo_prime: &Tensor,
    l_mo: &Tensor,
    alpha: f64,
) -> Result<Tensor> {
    if l_m.shape() != l_mo_prime.shape() || l_m.shape() != l_mo.shape() {
        return Err(Error::Dimension(format!(
            "combine_logits shapes {:?} / {:?} / {:?}",
            l_m.shape(),
            l_mo_prime.shape(),
            l_mo.shape()
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Contract(format!("alpha {alpha} must be ≥ 0")));
    }
    if alpha == 0.0 {
        return Ok(l_m.clone());
    }
    let mut out = l_m.clone();
    for ((o, &p), &q) in out
        .data_mut()
        .iter_mut()
        .zip(l_mo_prime.data())
        .zip(l_mo.data())
    {
        let d = p - q;
        if d != 0.0 {
            *o += alpha * d;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct OffsetEnsemble {
    /// M: the large frozen model whose weights never change.
    pub base: LanguageModel,
    /// M_o: the frozen small model, the subtrahend of the offset.
    pub offset_frozen: LanguageModel,
    /// M'_o: the only trainable model.
    pub offset_trainable: LanguageModel,
    pub alpha: f64,
    pub tokenizer_digest: [u8; 32],
}

impl OffsetEnsemble {
    pub fn new(
        base: LanguageModel,
        offset_frozen: LanguageModel,
        offset_trainable: LanguageModel,
        alpha: f64,
        tokenizer_digest: [u8; 32],
    ) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Config(format!("alpha {alpha} must be ≥ 0")));
        }
        let v = base.config.vocab_size;
        if offset_frozen.config.vocab_size != v || offset_trainable.config.vocab_size != v {
            return Err(Error::Compatibility(
                "ensemble members disagree on vocabulary size".into(),
            ));
        }
        if offset_frozen.config != offset_trainable.config {
            return Err(Error::Compatibility(
                "offset pair must share one configuration".into(),
            ));
        }
        if !base.frozen || !offset_frozen.frozen {
            return Err(Error::Contract("M and M_o must be frozen".into()));
        }
        if offset_trainable.frozen {
            return Err(Error::Contract("M'_o must be trainable".into()));
        }
        Ok(OffsetEnsemble {
            base,
            offset_frozen,
            offset_trainable,
            alpha,
            tokenizer_digest,
        })
    }

    /// Standard starting point: M'_o is a bit-identical copy of M_o, so
    /// the offset is zero and the ensemble behaves exactly like M.
    pub fn from_pair(
        base: LanguageModel,
        offset_frozen: LanguageModel,
        alpha: f64,
        tokenizer_digest: [u8; 32],
    ) -> Result<Self> {
        let mut trainable = offset_frozen.clone();
        trainable.frozen = false;
        Self::new(base, offset_frozen, trainable, alpha, tokenizer_digest)
    }

    /// Combined logits for the selected rows, shape [rows, vocab].
    pub fn logits_rows(&self, ids: &[u32], rows: &RowSel) -> Result<Tensor> {
        let l_m = self.base.logits_rows(ids, rows)?;
        let l_p = self.offset_trainable.logits_rows(ids, rows)?;
        let l_o = self.offset_frozen.logits_rows(ids, rows)?;
        combine_logits(&l_m, &l_p, &l_o, self.alpha)
    }

    /// softmax of the combined logits at position `t`; the normalized
    /// product-of-experts P_M · (P_{M'_o}/P_{M_o})^α.
    pub fn next_token_distribution(&self, ids: &[u32], t: usize) -> Result<Vec<f64>> {
        if t >= ids.len() {
            return Err(Error::Index(format!(
                "position {t} out of range for sequence of length {}",
                ids.len()
            )));
        }
        let logits = self.logits_rows(ids, &RowSel::Rows(vec![t]))?;
        Ok(softmax(logits.row(0)))
    }

    /// Replace M'_o with a model loaded from a checkpoint; M stays
    /// untouched (plug-and-play offsets over the same base).
    pub fn swap_offset_pair(self, ckpt: LoadedCheckpoint) -> Result<Self> {
        if ckpt.model.config != self.offset_frozen.config {
            return Err(Error::Compatibility(format!(
                "offset checkpoint config {:?} does not match {:?}",
                ckpt.model.config, self.offset_frozen.config
            )));
        }
        if ckpt.tokenizer_digest != self.tokenizer_digest {
            return Err(Error::Compatibility(
                "offset checkpoint was trained against a different tokenizer".into(),
            ));
        }
        let mut trainable = ckpt.model;
        trainable.frozen = false;
        Self::new(
            self.base,
            self.offset_frozen,
            trainable,
            self.alpha,
            self.tokenizer_digest,
        )
    }

    /// Digests of the two frozen members; the cache key.
    pub fn frozen_digests(&self) -> ([u8; 32], [u8; 32]) {
        (
            model_digest(&self.base, &self.tokenizer_digest),
            model_digest(&self.offset_frozen, &self.tokenizer_digest),
        )
    }
}

impl Scorer for OffsetEnsemble {
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
        OffsetEnsemble::logits_rows(self, ids, rows)
    }
}
