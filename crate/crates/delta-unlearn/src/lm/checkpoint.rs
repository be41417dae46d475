//! Bit-exact model persistence.
//!
//! Layout: magic "DLTA", version u32 LE, config block, tokenizer digest,
//! then one record per parameter (name length + name, rank, extents,
//! f64 LE payload), and a trailing SHA-256 digest of all preceding bytes.

use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::lm::config::{LMConfig, SizeTag};
use crate::lm::model::LanguageModel;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"DLTA";
const VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn get_u32(buf: &[u8], pos: &mut usize) -> Result<u32> {
    if *pos + 4 > buf.len() {
        return Err(Error::Format("truncated checkpoint".into()));
    }
    let v = u32::from_le_bytes(buf[*pos..*pos + 4].try_into().unwrap());
    *pos += 4;
    Ok(v)
}

pub fn serialize(model: &LanguageModel, tokenizer_digest: &[u8; 32]) -> Vec<u8> {
    let c = &model.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION);
    for v in [
        c.n_layers,
        c.n_heads,
        c.d_model,
        c.d_ff,
        c.max_seq_len,
        c.vocab_size,
    ] {
        put_u32(&mut buf, v as u32);
    }
    buf.push(match c.size_tag {
        SizeTag::Large => 0,
        SizeTag::Small => 1,
    });
    buf.push(model.frozen as u8);
    buf.extend_from_slice(tokenizer_digest);
    put_u32(&mut buf, model.params.len() as u32);
    for (_, p) in model.params.iter() {
        put_u32(&mut buf, p.name.len() as u32);
        buf.extend_from_slice(p.name.as_bytes());
        put_u32(&mut buf, p.value.shape().len() as u32);
        for &e in p.value.shape() {
            put_u32(&mut buf, e as u32);
        }
        for &v in p.value.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest: [u8; 32] = Sha256::digest(&buf).into();
    buf.extend_from_slice(&digest);
    buf
}

/// Content digest of a model's checkpoint bytes; the identity used for
/// frozen-weight invariance checks and cache keys.
pub fn model_digest(model: &LanguageModel, tokenizer_digest: &[u8; 32]) -> [u8; 32] {
    Sha256::digest(serialize(model, tokenizer_digest)).into()
}

pub fn save(model: &LanguageModel, tokenizer_digest: &[u8; 32], path: &Path) -> Result<()> {
    let bytes = serialize(model, tokenizer_digest);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub struct LoadedCheckpoint {
    pub model: LanguageModel,
    pub tokenizer_digest: [u8; 32],
}

pub fn deserialize(bytes: &[u8], expect_tag: Option<SizeTag>) -> Result<LoadedCheckpoint> {
    if bytes.len() < 4 + 4 + 32 {
        return Err(Error::Format("checkpoint too short".into()));
    }
    let (payload, digest) = bytes.split_at(bytes.len() - 32);
    let want: [u8; 32] = Sha256::digest(payload).into();
    if want != digest {
        return Err(Error::Corruption("checkpoint digest mismatch".into()));
    }
    let mut pos = 0usize;
    if &payload[..4] != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    pos += 4;
    let version = get_u32(payload, &mut pos)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "checkpoint version {version}, expected {VERSION}"
        )));
    }
    let n_layers = get_u32(payload, &mut pos)? as usize;
    let n_heads = get_u32(payload, &mut pos)? as usize;
    let d_model = get_u32(payload, &mut pos)? as usize;
    let d_ff = get_u32(payload, &mut pos)? as usize;
    let max_seq_len = get_u32(payload, &mut pos)? as usize;
    let vocab_size = get_u32(payload, &mut pos)? as usize;
    let size_tag = match payload.get(pos) {
        Some(0) => SizeTag::Large,
        Some(1) => SizeTag::Small,
        _ => return Err(Error::Format("bad size tag".into())),
    };
    pos += 1;
    let frozen = payload
        .get(pos)
        .map(|&b| b != 0)
        .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
    pos += 1;
    if let Some(tag) = expect_tag {
        if tag != size_tag {
            return Err(Error::Compatibility(format!(
                "checkpoint is {size_tag}, expected {tag}"
            )));
        }
    }
    let mut tokenizer_digest = [0u8; 32];
    if pos + 32 > payload.len() {
        return Err(Error::Format("truncated checkpoint".into()));
    }
    tokenizer_digest.copy_from_slice(&payload[pos..pos + 32]);
    pos += 32;

    let n_params = get_u32(payload, &mut pos)? as usize;
    let mut params = ParamStore::new();
    for _ in 0..n_params {
        let name_len = get_u32(payload, &mut pos)? as usize;
        if pos + name_len > payload.len() {
            return Err(Error::Format("truncated parameter name".into()));
        }
        let name = std::str::from_utf8(&payload[pos..pos + name_len])
            .map_err(|_| Error::Format("non-utf8 parameter name".into()))?
            .to_string();
        pos += name_len;
        let rank = get_u32(payload, &mut pos)? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(get_u32(payload, &mut pos)? as usize);
        }
        let n: usize = shape.iter().product();
        if pos + n * 8 > payload.len() {
            return Err(Error::Format("truncated parameter payload".into()));
        }
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            data.push(f64::from_le_bytes(
                payload[pos + i * 8..pos + i * 8 + 8].try_into().unwrap(),
            ));
        }
        pos += n * 8;
        params.add(&name, Tensor::new(shape, data)?);
    }
    let config = LMConfig {
        n_layers,
        n_heads,
        d_model,
        d_ff,
        max_seq_len,
        vocab_size,
        size_tag,
    };
    let model = LanguageModel::from_params(config, params, frozen)?;
    Ok(LoadedCheckpoint {
        model,
        tokenizer_digest,
    })
}

pub fn load(path: &Path, expect_tag: Option<SizeTag>) -> Result<LoadedCheckpoint> {
    let bytes = std::fs::read(path)?;
    deserialize(&bytes, expect_tag)
}
