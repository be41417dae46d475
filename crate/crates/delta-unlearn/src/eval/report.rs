//! Subset-level evaluation: metric rows per subset, the inference-time
//! α sweep, and the forget-vs-utility trade-off curve.

use super::metrics::{
    answer_probability, rouge_l_recall, truth_ratio_score, PerturbedMean,
};
use crate::corpus::{DatasetSplits, QAExample, Subset};
use crate::ensemble::OffsetEnsemble;
use crate::error::{Error, Result};
use crate::lm::{greedy_generate, Scorer, Tokenizer};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRow {
    pub subset: Subset,
    pub rouge_l_recall: f64,
    pub probability: f64,
    /// Raw truth ratio R (mean over examples); absent when the subset
    /// carries no perturbed answers.
    pub truth_ratio: Option<f64>,
    /// Normalized truth-ratio score in [0, 1].
    pub truth_ratio_score: Option<f64>,
    pub n_examples: usize,
    /// Examples where some probability hit the floor.
    pub floored: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Path or label of the run manifest this report belongs to.
    pub manifest: Option<String>,
    pub rows: Vec<MetricRow>,
    /// Exact-match accuracy of greedy generation on general_heldout.
    pub general_heldout_accuracy: f64,
    /// Documented deviations baked into the numbers: control-set truth
    /// ratios use the original answer in place of a paraphrase.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    /// Evenly strided subsample per subset; None evaluates everything.
    pub max_examples_per_subset: Option<usize>,
    pub max_new_tokens: usize,
    pub perturbed_mean: PerturbedMean,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            max_examples_per_subset: None,
            max_new_tokens: 24,
            perturbed_mean: PerturbedMean::Arithmetic,
        }
    }
}

/// Deterministic evenly-strided subsample of a subset.
pub fn subsample(examples: &[QAExample], max: Option<usize>) -> Vec<&QAExample> {
    match max {
        Some(m) if m > 0 && m < examples.len() => (0..m)
            .map(|i| &examples[i * examples.len() / m])
            .collect(),
        _ => examples.iter().collect(),
    }
}

/// Greedy generation from the question prompt, decoded to a string.
pub fn generate_answer<S: Scorer + ?Sized>(
    scorer: &S,
    tok: &Tokenizer,
    question: &str,
    max_new: usize,
) -> Result<String> {
    let prompt = tok.encode_prompt(question)?;
    let out = greedy_generate(scorer, &prompt, max_new)?;
    Ok(tok.decode(&out))
}

/// Mean forget-set ROUGE-L recall of greedy generations; the quantity
/// the lr search and trajectory logs track.
pub fn mean_rouge<S: Scorer + ?Sized>(
    scorer: &S,
    tok: &Tokenizer,
    examples: &[&QAExample],
    max_new: usize,
) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Contract("mean_rouge over no examples".into()));
    }
    // read-only inference; fan out across workers, order-independent sum
    let scores: Vec<f64> = examples
        .par_iter()
        .map(|ex| {
            let gen = generate_answer(scorer, tok, &ex.question, max_new)?;
            rouge_l_recall(&gen, &ex.answer)
        })
        .collect::<Result<_>>()?;
    Ok(scores.iter().sum::<f64>() / examples.len() as f64)
}

pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    tok: &Tokenizer,
    splits: &DatasetSplits,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let mut rows = Vec::new();
    let mut heldout_exact = 0usize;
    let mut heldout_total = 0usize;
    for subset in Subset::ALL {
        let examples = subsample(splits.subset(subset), opts.max_examples_per_subset);
        if examples.is_empty() {
            continue;
        }
        let mut rouge_sum = 0.0;
        let mut prob_sum = 0.0;
        let mut tr_sum = 0.0;
        let mut trs_sum = 0.0;
        let mut tr_n = 0usize;
        let mut floored = 0usize;
        for ex in &examples {
            let gen = generate_answer(scorer, tok, &ex.question, opts.max_new_tokens)?;
            rouge_sum += rouge_l_recall(&gen, &ex.answer)?;
            if subset == Subset::GeneralHeldout {
                heldout_total += 1;
                if gen == ex.answer {
                    heldout_exact += 1;
                }
            }
            let p = answer_probability(scorer, tok, &ex.question, &ex.answer)?;
            prob_sum += p.prob;
            let mut hit_floor = p.floored;
            if let Some(tr) = truth_ratio_score(scorer, tok, ex, opts.perturbed_mean)? {
                tr_sum += tr.ratio;
                trs_sum += tr.score;
                tr_n += 1;
                hit_floor |= tr.floored;
            }
            floored += hit_floor as usize;
        }
        let n = examples.len() as f64;
        rows.push(MetricRow {
            subset,
            rouge_l_recall: rouge_sum / n,
            probability: prob_sum / n,
            truth_ratio: (tr_n > 0).then(|| tr_sum / tr_n as f64),
            truth_ratio_score: (tr_n > 0).then(|| trs_sum / tr_n as f64),
            n_examples: examples.len(),
            floored,
        });
    }
    Ok(EvalReport {
        manifest: None,
        rows,
        general_heldout_accuracy: if heldout_total == 0 {
            0.0
        } else {
            heldout_exact as f64 / heldout_total as f64
        },
        notes: vec![
            "control-set truth ratios use the original answer in place of a paraphrase"
                .into(),
        ],
    })
}

impl EvalReport {
    pub fn row(&self, subset: Subset) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.subset == subset)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "subset,rouge_l_recall,probability,truth_ratio,truth_ratio_score,n_examples,floored\n",
        );
        for r in &self.rows {
            let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.subset.key(),
                r.rouge_l_recall,
                r.probability,
                fmt_opt(r.truth_ratio),
                fmt_opt(r.truth_ratio_score),
                r.n_examples,
                r.floored
            ));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub forget: f64,
    pub retain: f64,
    pub real_analog: f64,
    pub world_analog: f64,
    pub general_heldout: f64,
}

/// Per-subset ROUGE at each inference-time α, without retraining. Read
/// only: the ensemble is cloned per row and never written back.
pub fn alpha_sweep(
    ens: &OffsetEnsemble,
    tok: &Tokenizer,
    splits: &DatasetSplits,
    alphas: &[f64],
    opts: &EvalOptions,
) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() {
        return Err(Error::Config("empty alpha grid".into()));
    }
    if alphas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "alpha grid must be strictly increasing, got {alphas:?}"
        )));
    }
    let mut out = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut at = ens.clone();
        at.alpha = alpha;
        let rouge = |subset: Subset| -> Result<f64> {
            let examples = subsample(splits.subset(subset), opts.max_examples_per_subset);
            mean_rouge(&at, tok, &examples, opts.max_new_tokens)
        };
        out.push(SweepRow {
            alpha,
            forget: rouge(Subset::Forget)?,
            retain: rouge(Subset::Retain)?,
            real_analog: rouge(Subset::RealAnalog)?,
            world_analog: rouge(Subset::WorldAnalog)?,
            general_heldout: rouge(Subset::GeneralHeldout)?,
        });
    }
    Ok(out)
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("alpha,forget,retain,real_analog,world_analog,general_heldout\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.alpha, r.forget, r.retain, r.real_analog, r.world_analog, r.general_heldout
        ));
    }
    out
}

/// One logged evaluation point along a training run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub step: usize,
    pub loss: f64,
    pub forget_rouge: f64,
    pub retain_rouge: f64,
    pub real_rouge: f64,
    pub world_rouge: f64,
}

pub fn trajectory_to_csv(points: &[TrajectoryPoint]) -> String {
    let mut out = String::from("step,loss,forget_rouge,retain_rouge,real_rouge,world_rouge\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            p.step, p.loss, p.forget_rouge, p.retain_rouge, p.real_rouge, p.world_rouge
        ));
    }
    out
}

/// Forget-vs-utility curve: one (forget ROUGE, mean non-forget ROUGE)
/// point per logged step.
pub fn tradeoff_curve(points: &[TrajectoryPoint]) -> String {
    let mut out = String::from("step,forget_rouge,nonforget_rouge\n");
    for p in points {
        let nonforget = (p.retain_rouge + p.real_rouge + p.world_rouge) / 3.0;
        out.push_str(&format!("{},{},{}\n", p.step, p.forget_rouge, nonforget));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_corpus;
    use crate::lm::checkpoint::model_digest;
    use crate::lm::{LMConfig, LanguageModel};
    use crate::rng::Rng;

    fn tiny_world() -> (OffsetEnsemble, Tokenizer, DatasetSplits) {
        let splits = generate_corpus(20, 3, 0.1, 2, 5).unwrap();
        let tok = Tokenizer::from_texts(splits.all_texts());
        let mut rng = Rng::new(1);
        let mut base = LanguageModel::init(
            LMConfig {
                n_layers: 1,
                n_heads: 2,
                d_model: 16,
                d_ff: 32,
                max_seq_len: 48,
                vocab_size: tok.vocab_size(),
                size_tag: crate::lm::SizeTag::Large,
            },
            &mut rng,
        )
        .unwrap();
        base.frozen = true;
        let mut small = base.clone();
        small.config.size_tag = crate::lm::SizeTag::Small;
        small.frozen = true;
        let ens =
            OffsetEnsemble::from_pair(base, small, 1.0, tok.digest()).unwrap();
        (ens, tok, splits)
    }

    #[test]
    fn subsample_is_strided_and_capped() {
        let splits = generate_corpus(20, 3, 0.1, 2, 5).unwrap();
        let got = subsample(&splits.retain, Some(5));
        assert_eq!(got.len(), 5);
        let all = subsample(&splits.retain, None);
        assert_eq!(all.len(), splits.retain.len());
        let ids: Vec<&str> = got.iter().map(|e| e.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 5, "no duplicates in the stride");
    }

    #[test]
    fn evaluate_is_deterministic_and_bounded() {
        let (ens, tok, splits) = tiny_world();
        let opts = EvalOptions {
            max_examples_per_subset: Some(4),
            ..Default::default()
        };
        let a = evaluate(&ens, &tok, &splits, &opts).unwrap();
        let b = evaluate(&ens, &tok, &splits, &opts).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.rows.len(), 5);
        for r in &a.rows {
            assert!((0.0..=1.0).contains(&r.rouge_l_recall));
            assert!((0.0..=1.0).contains(&r.probability));
            if let Some(s) = r.truth_ratio_score {
                assert!((0.0..=1.0).contains(&s));
            }
        }
        assert!((0.0..=1.0).contains(&a.general_heldout_accuracy));
        let csv = a.to_csv();
        assert!(csv.starts_with("subset,"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn sweep_alpha_zero_equals_base_alone_and_is_side_effect_free() {
        let (ens, tok, splits) = tiny_world();
        let opts = EvalOptions {
            max_examples_per_subset: Some(3),
            ..Default::default()
        };
        let before_base = model_digest(&ens.base, &ens.tokenizer_digest);
        let before_trainable = model_digest(&ens.offset_trainable, &ens.tokenizer_digest);
        let rows = alpha_sweep(&ens, &tok, &splits, &[0.0, 1.0], &opts).unwrap();
        assert_eq!(before_base, model_digest(&ens.base, &ens.tokenizer_digest));
        assert_eq!(
            before_trainable,
            model_digest(&ens.offset_trainable, &ens.tokenizer_digest)
        );

        let examples = subsample(&splits.forget, Some(3));
        let base_only = mean_rouge(&ens.base, &tok, &examples, opts.max_new_tokens).unwrap();
        assert_eq!(rows[0].forget, base_only);

        assert!(matches!(
            alpha_sweep(&ens, &tok, &splits, &[1.0, 0.5], &opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn trajectory_and_tradeoff_csv_schema() {
        let pts = vec![
            TrajectoryPoint {
                step: 0,
                loss: 2.5,
                forget_rouge: 0.9,
                retain_rouge: 0.9,
                real_rouge: 0.6,
                world_rouge: 0.3,
            },
            TrajectoryPoint {
                step: 10,
                loss: 1.5,
                forget_rouge: 0.5,
                retain_rouge: 0.8,
                real_rouge: 0.6,
                world_rouge: 0.4,
            },
        ];
        let csv = trajectory_to_csv(&pts);
        assert!(csv.starts_with("step,loss,forget_rouge,retain_rouge,real_rouge,world_rouge\n"));
        let curve = tradeoff_curve(&pts);
        let second: Vec<&str> = curve.lines().nth(2).unwrap().split(',').collect();
        assert_eq!(second[1], "0.5");
        let non: f64 = second[2].parse().unwrap();
        assert!((non - 0.6).abs() < 1e-12);
    }
}
