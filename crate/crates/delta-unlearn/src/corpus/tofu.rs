//! Ingestion of externally supplied TOFU-format datasets: line-delimited
//! JSON records with `question`, `answer`, and (where available)
//! `paraphrased_answer` / `perturbed_answers` fields.

use super::types::{DatasetSplits, QAExample, Subset};
use crate::error::{Error, Result};
use serde::Deserialize;
use std::io::BufRead;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default)]
pub struct TofuPaths {
    pub forget: PathBuf,
    pub retain: PathBuf,
    pub real_analog: Option<PathBuf>,
    pub world_analog: Option<PathBuf>,
    pub general_heldout: Option<PathBuf>,
}

#[derive(Deserialize)]
struct RawRecord {
    question: String,
    answer: String,
    #[serde(default)]
    paraphrased_answer: Option<String>,
    #[serde(default)]
    perturbed_answers: Vec<String>,
    #[serde(default)]
    relabel_answer: Option<String>,
}

fn read_role(path: &Path, subset: Subset) -> Result<Vec<QAExample>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if raw.question.trim().is_empty() || raw.answer.trim().is_empty() {
            return Err(parse_err("empty question or answer".into()));
        }
        out.push(QAExample {
            id: format!("ingest-{}-{:04}", subset.key(), i + 1),
            subset,
            question: raw.question,
            answer: raw.answer,
            paraphrased_answer: raw.paraphrased_answer,
            perturbed_answers: raw.perturbed_answers,
            relabel_answer: raw.relabel_answer,
        });
    }
    Ok(out)
}

/// Map external files into [`DatasetSplits`]; subset labels come from
/// file role. Missing paraphrases or perturbations are tolerated — the
/// metrics that need them fall back to answer-only evaluation.
pub fn ingest_tofu_format(paths: &TofuPaths) -> Result<DatasetSplits> {
    let forget = read_role(&paths.forget, Subset::Forget)?;
    let retain = read_role(&paths.retain, Subset::Retain)?;
    let opt = |p: &Option<PathBuf>, s: Subset| -> Result<Vec<QAExample>> {
        match p {
            Some(path) => read_role(path, s),
            None => Ok(Vec::new()),
        }
    };
    Ok(DatasetSplits {
        forget,
        retain,
        real_analog: opt(&paths.real_analog, Subset::RealAnalog)?,
        world_analog: opt(&paths.world_analog, Subset::WorldAnalog)?,
        general_heldout: opt(&paths.general_heldout, Subset::GeneralHeldout)?,
        authors: Vec::new(),
        forget_author_ids: Vec::new(),
        seed: 0,
    })
}
