use crate::error::{Error, Result};
use crate::lm::Tokenizer;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    Forget,
    Retain,
    RealAnalog,
    WorldAnalog,
    GeneralHeldout,
}

impl Subset {
    pub const ALL: [Subset; 5] = [
        Subset::Forget,
        Subset::Retain,
        Subset::RealAnalog,
        Subset::WorldAnalog,
        Subset::GeneralHeldout,
    ];

    /// File stem / report key for the subset.
    pub fn key(self) -> &'static str {
        match self {
            Subset::Forget => "forget",
            Subset::Retain => "retain",
            Subset::RealAnalog => "real_analog",
            Subset::WorldAnalog => "world_analog",
            Subset::GeneralHeldout => "general_heldout",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub subset: Subset,
    pub question: String,
    pub answer: String,
    /// Restatement of the answer that keeps the fact phrase verbatim.
    /// Absent on control sets, which fall back to the original answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paraphrased_answer: Option<String>,
    /// Same template as `answer` with the fact slot replaced by a wrong
    /// value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturbed_answers: Vec<String>,
    /// Abstention text; set on forget examples only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relabel_answer: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuthorProfile {
    pub id: usize,
    pub name: String,
    /// (attribute key, sampled fact value) pairs; each yields one QA pair.
    pub attributes: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub forget: Vec<QAExample>,
    pub retain: Vec<QAExample>,
    pub real_analog: Vec<QAExample>,
    pub world_analog: Vec<QAExample>,
    pub general_heldout: Vec<QAExample>,
    pub authors: Vec<AuthorProfile>,
    pub forget_author_ids: Vec<usize>,
    pub seed: u64,
}

impl DatasetSplits {
    /// The full fictitious training set S = S_f ∪ S_r.
    pub fn fictitious(&self) -> impl Iterator<Item = &QAExample> {
        self.forget.iter().chain(self.retain.iter())
    }

    /// Control material the base models are expected to know: the three
    /// non-fictitious sets.
    pub fn control(&self) -> impl Iterator<Item = &QAExample> {
        self.real_analog
            .iter()
            .chain(self.world_analog.iter())
            .chain(self.general_heldout.iter())
    }

    pub fn subset(&self, which: Subset) -> &[QAExample] {
        match which {
            Subset::Forget => &self.forget,
            Subset::Retain => &self.retain,
            Subset::RealAnalog => &self.real_analog,
            Subset::WorldAnalog => &self.world_analog,
            Subset::GeneralHeldout => &self.general_heldout,
        }
    }

    /// Every string in the dataset, for vocabulary construction.
    pub fn all_texts(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for ex in self.fictitious().chain(self.control()) {
            out.push(ex.question.as_str());
            out.push(ex.answer.as_str());
            if let Some(p) = &ex.paraphrased_answer {
                out.push(p.as_str());
            }
            for w in &ex.perturbed_answers {
                out.push(w.as_str());
            }
            if let Some(r) = &ex.relabel_answer {
                out.push(r.as_str());
            }
        }
        out
    }

    /// Write one `.jsonl` file per subset into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for which in Subset::ALL {
            let path = dir.join(format!("{}.jsonl", which.key()));
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            for ex in self.subset(which) {
                serde_json::to_writer(&mut f, ex)?;
                f.write_all(b"\n")?;
            }
            f.flush()?;
        }
        let meta = dir.join("splits.json");
        let f = std::io::BufWriter::new(std::fs::File::create(meta)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let f = std::fs::File::open(dir.join("splits.json"))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

/// Read one subset's worth of examples from a `.jsonl` file, reporting
/// parse failures with their line number.
pub fn read_jsonl(path: &Path, subset: Subset) -> Result<Vec<QAExample>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut ex: QAExample =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
        ex.subset = subset;
        out.push(ex);
    }
    Ok(out)
}

/// Check that a tokenizer covers every string in the dataset; on failure
/// report how many symbols are missing and a sample of them.
pub fn check_vocabulary(splits: &DatasetSplits, tokenizer: &Tokenizer) -> Result<()> {
    let missing = tokenizer.coverage_report(splits.all_texts());
    if missing.is_empty() {
        Ok(())
    } else {
        let count = missing.len();
        let sample: Vec<String> = missing.into_iter().take(8).collect();
        Err(Error::VocabularyExtension { count, sample })
    }
}
