//! Pre-computed frozen logits. M and M_o never change during
//! unlearning, so their answer-row logits are computed once up front;
//! every training step then runs only the small trainable forward.

use super::OffsetEnsemble;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::lm::RowSel;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"DLTC";
const VERSION: u32 = 1;

/// A tokenized sequence and the row positions whose logits are needed
/// (the answer rows of a QA sequence).
#[derive(Debug, Clone)]
pub struct SeqSpec {
    pub id: String,
    pub tokens: Vec<u32>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub rows: Vec<usize>,
    /// l_M at the cached rows, [rows, vocab].
    pub base_rows: Tensor,
    /// l_{M_o} at the cached rows, [rows, vocab].
    pub offset_rows: Tensor,
}

#[derive(Debug, Clone)]
pub struct FrozenLogitCache {
    pub base_digest: [u8; 32],
    pub offset_digest: [u8; 32],
    entries: BTreeMap<String, CacheEntry>,
}

pub fn build_frozen_cache(ens: &OffsetEnsemble, seqs: &[SeqSpec]) -> Result<FrozenLogitCache> {
    let (base_digest, offset_digest) = ens.frozen_digests();
    let mut entries = BTreeMap::new();
    for seq in seqs {
        if seq.rows.is_empty() {
            return Err(Error::Contract(format!(
                "sequence {:?} has no rows to cache",
                seq.id
            )));
        }
        let sel = RowSel::Rows(seq.rows.clone());
        let entry = CacheEntry {
            rows: seq.rows.clone(),
            base_rows: ens.base.logits_rows(&seq.tokens, &sel)?,
            offset_rows: ens.offset_frozen.logits_rows(&seq.tokens, &sel)?,
        };
        if entries.insert(seq.id.clone(), entry).is_some() {
            return Err(Error::Contract(format!("duplicate sequence id {:?}", seq.id)));
        }
    }
    Ok(FrozenLogitCache {
        base_digest,
        offset_digest,
        entries,
    })
}

impl FrozenLogitCache {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&CacheEntry> {
        self.entries
            .get(id)
            .ok_or_else(|| Error::StaleCache(format!("no cached logits for example {id:?}")))
    }

    /// Fail if the ensemble's frozen members are not the ones this cache
    /// was built from. The trainable model is deliberately not part of
    /// the key: mutating it never invalidates the cache.
    pub fn verify(&self, ens: &OffsetEnsemble) -> Result<()> {
        let (base, offset) = ens.frozen_digests();
        if base != self.base_digest || offset != self.offset_digest {
            return Err(Error::StaleCache(
                "frozen model digests do not match the cache header".into(),
            ));
        }
        Ok(())
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&self.base_digest);
        buf.extend_from_slice(&self.offset_digest);
        buf.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (id, e) in &self.entries {
            buf.extend_from_slice(&(id.len() as u32).to_le_bytes());
            buf.extend_from_slice(id.as_bytes());
            buf.extend_from_slice(&(e.rows.len() as u32).to_le_bytes());
            for &r in &e.rows {
                buf.extend_from_slice(&(r as u32).to_le_bytes());
            }
            let (_, vocab) = e.base_rows.rows_cols();
            buf.extend_from_slice(&(vocab as u32).to_le_bytes());
            for t in [&e.base_rows, &e.offset_rows] {
                for &v in t.data() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let digest: [u8; 32] = Sha256::digest(&buf).into();
        buf.extend_from_slice(&digest);
        buf
    }

    pub fn content_digest(&self) -> [u8; 32] {
        Sha256::digest(self.serialize()).into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.serialize())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::deserialize(&bytes)
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 4 + 64 + 4 + 32 {
            return Err(Error::Format("cache file too short".into()));
        }
        let (payload, digest) = bytes.split_at(bytes.len() - 32);
        let want: [u8; 32] = Sha256::digest(payload).into();
        if want != digest {
            return Err(Error::Corruption("cache digest mismatch".into()));
        }
        let mut pos = 0usize;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > payload.len() {
                return Err(Error::Format("truncated cache".into()));
            }
            let s = &payload[*pos..*pos + n];
            *pos += n;
            Ok(s)
        };
        if take(&mut pos, 4)? != MAGIC {
            return Err(Error::Format("bad cache magic".into()));
        }
        let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Format(format!("cache version {version}")));
        }
        let mut base_digest = [0u8; 32];
        base_digest.copy_from_slice(take(&mut pos, 32)?);
        let mut offset_digest = [0u8; 32];
        offset_digest.copy_from_slice(take(&mut pos, 32)?);
        let n = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut entries = BTreeMap::new();
        for _ in 0..n {
            let id_len = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
            let id = std::str::from_utf8(take(&mut pos, id_len)?)
                .map_err(|_| Error::Format("non-utf8 cache id".into()))?
                .to_string();
            let n_rows =
                u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
            let mut rows = Vec::with_capacity(n_rows);
            for _ in 0..n_rows {
                rows.push(u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize);
            }
            let vocab = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
            let read_tensor = |pos: &mut usize| -> Result<Tensor> {
                let raw = take(pos, n_rows * vocab * 8)?;
                let data = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Tensor::new(vec![n_rows, vocab], data)
            };
            let base_rows = read_tensor(&mut pos)?;
            let offset_rows = read_tensor(&mut pos)?;
            entries.insert(
                id,
                CacheEntry {
                    rows,
                    base_rows,
                    offset_rows,
                },
            );
        }
        Ok(FrozenLogitCache {
            base_digest,
            offset_digest,
            entries,
        })
    }
}
