//! Per-example metrics: ROUGE-L recall, length-normalized answer
//! probability, and the normalized truth ratio.

use crate::autodiff::log_softmax_at;
use crate::corpus::{QAExample, Subset};
use crate::error::{Error, Result};
use crate::lm::{RowSel, Scorer, Tokenizer};

/// Probabilities are floored here before taking ratios, so a fully
/// suppressed paraphrase yields a huge but finite truth ratio. Floored
/// evaluations are flagged in reports.
pub const PROB_FLOOR: f64 = 1e-300;

/// Word-token LCS length over |reference| tokens.
pub fn rouge_l_recall(generated: &str, reference: &str) -> Result<f64> {
    let g: Vec<&str> = generated.split_whitespace().collect();
    let r: Vec<&str> = reference.split_whitespace().collect();
    if r.is_empty() {
        return Err(Error::Contract("empty ROUGE reference".into()));
    }
    if g.is_empty() {
        return Ok(0.0);
    }
    // classic O(|g|·|r|) LCS table, rolling rows
    let mut prev = vec![0usize; r.len() + 1];
    let mut cur = vec![0usize; r.len() + 1];
    for gi in &g {
        for (j, rj) in r.iter().enumerate() {
            cur[j + 1] = if gi == rj {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[r.len()] as f64 / r.len() as f64)
}

#[derive(Debug, Clone, Copy)]
pub struct AnswerProb {
    /// Geometric mean per-token probability, P(a|q)^(1/|a|).
    pub prob: f64,
    /// True if any per-token probability hit [`PROB_FLOOR`].
    pub floored: bool,
}

/// Length-normalized conditional probability of `answer` given
/// `question` under the scorer. Scored over the answer tokens proper
/// (EOS excluded).
pub fn answer_probability<S: Scorer + ?Sized>(
    scorer: &S,
    tok: &Tokenizer,
    question: &str,
    answer: &str,
) -> Result<AnswerProb> {
    let q_ids = tok.encode(question)?;
    let a_ids = tok.encode(answer)?;
    if a_ids.is_empty() {
        return Err(Error::Contract("empty answer".into()));
    }
    let ids = tok.encode_qa(question, answer)?;
    // answer token k sits at position sep+1+k and is predicted by the
    // logit row one position earlier
    let sep = 1 + q_ids.len();
    let rows: Vec<usize> = (sep..sep + a_ids.len()).collect();
    let logits = scorer.logits_rows(&ids, &RowSel::Rows(rows))?;
    let mut log_sum = 0.0;
    let mut floored = false;
    for (k, &target) in a_ids.iter().enumerate() {
        let lp = log_softmax_at(logits.row(k), target as usize);
        let p = lp.exp();
        if p < PROB_FLOOR {
            log_sum += PROB_FLOOR.ln();
            floored = true;
        } else {
            log_sum += lp;
        }
    }
    Ok(AnswerProb {
        prob: (log_sum / a_ids.len() as f64).exp(),
        floored,
    })
}

/// How the K perturbed-answer probabilities are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PerturbedMean {
    #[default]
    Arithmetic,
    Geometric,
}

/// Normalization of the raw ratio R into a higher-is-better score:
/// forget wants wrong answers to win (score grows with R), every other
/// subset wants them to lose.
pub fn normalize_truth_ratio(r: f64, subset: Subset) -> f64 {
    let s = match subset {
        Subset::Forget => 1.0 - 1.0 / r,
        _ => 1.0 - r,
    };
    s.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct TruthRatio {
    /// R = mean_k P(wrong_k) / P(ã).
    pub ratio: f64,
    /// Normalized score in [0, 1]; higher is better on every subset.
    pub score: f64,
    pub floored: bool,
}

/// Truth ratio of one example: perturbed-answer probability relative to
/// the paraphrased answer (original answer on control sets, which carry
/// no trained paraphrase). `None` when the example has no perturbed
/// answers to compare against.
pub fn truth_ratio_score<S: Scorer + ?Sized>(
    scorer: &S,
    tok: &Tokenizer,
    ex: &QAExample,
    mean_kind: PerturbedMean,
) -> Result<Option<TruthRatio>> {
    if ex.perturbed_answers.is_empty() {
        return Ok(None);
    }
    let reference = match (ex.subset, &ex.paraphrased_answer) {
        (Subset::Forget | Subset::Retain, Some(p)) => p.as_str(),
        _ => ex.answer.as_str(),
    };
    let ref_p = answer_probability(scorer, tok, &ex.question, reference)?;
    let mut floored = ref_p.floored;
    let mut wrong = Vec::with_capacity(ex.perturbed_answers.len());
    for w in &ex.perturbed_answers {
        let p = answer_probability(scorer, tok, &ex.question, w)?;
        floored |= p.floored;
        wrong.push(p.prob.max(PROB_FLOOR));
    }
    let wrong_mean = match mean_kind {
        PerturbedMean::Arithmetic => wrong.iter().sum::<f64>() / wrong.len() as f64,
        PerturbedMean::Geometric => {
            (wrong.iter().map(|p| p.ln()).sum::<f64>() / wrong.len() as f64).exp()
        }
    };
    let ratio = wrong_mean / ref_p.prob.max(PROB_FLOOR);
    Ok(Some(TruthRatio {
        ratio,
        score: normalize_truth_ratio(ratio, ex.subset),
        floored,
    }))
}
