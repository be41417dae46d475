//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Criteria 2 and 5–8 share one full-scale pipeline run (the expensive
//! part) through a lazily initialized fixture.

use delta_unlearn::autodiff::{softmax, Tape, Tensor};
use delta_unlearn::corpus::{QAExample, Subset};
use delta_unlearn::ensemble::OffsetEnsemble;
use delta_unlearn::eval::{
    answer_probability, normalize_truth_ratio, rouge_l_recall, subsample,
};
use delta_unlearn::lm::checkpoint::model_digest;
use delta_unlearn::lm::{LMConfig, LanguageModel, RowSel, SizeTag, Tokenizer};
use delta_unlearn::pipeline::{
    build_ensemble, cmd_gen_data, cmd_memorize, cmd_pretrain, cmd_repro, cmd_retrain,
    cmd_sweep, cmd_unlearn, CorpusParams, LrChoice, MemorizeParams, MemorizeReport,
    ModelParams, RetrainReport, RunConfig, SizeSpec, StageParams,
};
use delta_unlearn::rng::Rng;
use delta_unlearn::unlearn::{
    loss_ga, loss_gd, loss_kl, loss_relabel, prepare_example, unlearn_run, Algorithm,
    PreparedExample, UnlearnConfig,
};
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;
use tempfile::TempDir;

const ROUGE_TOLERANCE: f64 = 0.03;

// ---- shared full-scale pipeline fixture ----

struct Shared {
    cfg: RunConfig,
    _dir: TempDir,
    memorize: MemorizeReport,
    retrain: RetrainReport,
    /// Final forget ROUGE of the target-matched GA run.
    ga_final_forget: f64,
    ga_checkpoint: std::path::PathBuf,
    /// Digests of the frozen checkpoints before any unlearning ran.
    frozen_files_before: (Vec<u8>, Vec<u8>),
    elapsed_secs: f64,
}

static SHARED: OnceLock<Shared> = OnceLock::new();

fn file_digest(path: &Path) -> Vec<u8> {
    use sha2::{Digest, Sha256};
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

fn shared() -> &'static Shared {
    SHARED.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let mut cfg = RunConfig::default();
        cfg.out_dir = dir.path().to_path_buf();
        cfg.seed = 7;

        let start = Instant::now();
        cmd_gen_data(&cfg).unwrap();
        cmd_pretrain(&cfg).unwrap();
        let memorize = cmd_memorize(&cfg).unwrap();
        let retrain = cmd_retrain(&cfg).unwrap();
        let dirs = cfg.dirs().unwrap();
        let frozen_files_before = (
            file_digest(&dirs.checkpoint("memorized_large")),
            file_digest(&dirs.checkpoint("memorized_small")),
        );
        let ga = cmd_unlearn(&cfg, LrChoice::MatchTarget(None)).unwrap();
        let elapsed_secs = start.elapsed().as_secs_f64();

        Shared {
            ga_final_forget: ga.outcome.trajectory.last().unwrap().forget_rouge,
            ga_checkpoint: ga.checkpoint,
            cfg,
            _dir: dir,
            memorize,
            retrain,
            frozen_files_before,
            elapsed_secs,
        }
    })
}

fn frozen_files_unchanged(sh: &Shared) {
    let dirs = sh.cfg.dirs().unwrap();
    assert_eq!(
        sh.frozen_files_before.0,
        file_digest(&dirs.checkpoint("memorized_large")),
        "base checkpoint changed on disk"
    );
    assert_eq!(
        sh.frozen_files_before.1,
        file_digest(&dirs.checkpoint("memorized_small")),
        "frozen offset checkpoint changed on disk"
    );
}

// ---- criterion 1: ensemble identity ----

#[test]
fn criterion_1_ensemble_identity() {
    let start = Instant::now();
    let mut rng = Rng::new(11);
    let vocab = 32;
    let cfg_large = LMConfig {
        n_layers: 1,
        n_heads: 2,
        d_model: 16,
        d_ff: 32,
        max_seq_len: 16,
        vocab_size: vocab,
        size_tag: SizeTag::Large,
    };
    let cfg_small = LMConfig {
        d_model: 8,
        d_ff: 16,
        size_tag: SizeTag::Small,
        ..cfg_large.clone()
    };
    let mut base = LanguageModel::init(cfg_large, &mut rng).unwrap();
    base.frozen = true;
    let mut frozen = LanguageModel::init(cfg_small.clone(), &mut rng).unwrap();
    frozen.frozen = true;
    let diverged = LanguageModel::init(cfg_small, &mut rng).unwrap();

    let zero_alpha = OffsetEnsemble::new(
        base.clone(),
        frozen.clone(),
        diverged.clone(),
        0.0,
        [0u8; 32],
    )
    .unwrap();
    let identical_pair =
        OffsetEnsemble::from_pair(base.clone(), frozen.clone(), 1.0, [0u8; 32]).unwrap();

    for i in 0..200 {
        let len = 2 + (i % 14);
        let ids: Vec<u32> = (0..len).map(|_| rng.gen_range(vocab) as u32).collect();
        let want = base.logits_rows(&ids, &RowSel::Last).unwrap();

        // alpha = 0 and M'_o == M_o are both bit-transparent
        for ens in [&zero_alpha, &identical_pair] {
            let got = ens.logits_rows(&ids, &RowSel::Last).unwrap();
            assert!(
                got.data()
                    .iter()
                    .zip(want.data())
                    .all(|(a, b)| a.to_bits() == b.to_bits()),
                "ensemble logits not bit-equal to M at input {i}"
            );
        }

        // product-of-experts form for a grid of alphas
        let l_p = diverged.logits_rows(&ids, &RowSel::Last).unwrap();
        let l_o = frozen.logits_rows(&ids, &RowSel::Last).unwrap();
        for alpha in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let mut at = zero_alpha.clone();
            at.alpha = alpha;
            let combined = at.logits_rows(&ids, &RowSel::Last).unwrap();
            let p_combined = softmax(combined.data());

            let p_m = softmax(want.data());
            let p_p = softmax(l_p.data());
            let p_o = softmax(l_o.data());
            let mut poe: Vec<f64> = (0..vocab)
                .map(|v| p_m[v] * (p_p[v] / p_o[v]).powf(alpha))
                .collect();
            let z: f64 = poe.iter().sum();
            for v in poe.iter_mut() {
                *v /= z;
            }
            for v in 0..vocab {
                assert!(
                    (p_combined[v] - poe[v]).abs() < 1e-10,
                    "PoE mismatch at alpha {alpha}"
                );
            }
        }
    }
    assert!(start.elapsed().as_secs() < 60, "criterion 1 exceeded 1 min");
    println!("criterion 1 (ensemble identity + product-of-experts): PASS");
}

// ---- criterion 2: frozen-weight invariance ----

#[test]
fn criterion_2_frozen_weight_invariance() {
    let sh = shared();
    // the full GA run already happened in the fixture; its inputs on
    // disk must be untouched
    frozen_files_unchanged(sh);

    // and an in-process run must leave the loaded frozen members
    // bit-identical too
    let ens = build_ensemble(&sh.cfg, None, 1.0).unwrap();
    let before = ens.frozen_digests();
    let cfg = UnlearnConfig {
        epochs: 1,
        batch_size: 4,
        learning_rate: 1e-4,
        trajectory_samples: 4,
        max_new_tokens: 8,
        ..UnlearnConfig::default()
    };
    let dirs = sh.cfg.dirs().unwrap();
    let splits = delta_unlearn::corpus::DatasetSplits::load(&dirs.data).unwrap();
    let tok = Tokenizer::load(&dirs.tokenizer()).unwrap();
    unlearn_run(&ens, &tok, &splits, &cfg).unwrap();
    assert_eq!(before, ens.frozen_digests(), "frozen members mutated");
    println!("criterion 2 (frozen-weight invariance after GA run): PASS");
}

// ---- criterion 3: gradient correctness on a 2-layer vocab-16 toy ----

/// Tiny QA world over a 16-token vocabulary (12 words + 4 specials).
fn toy_world() -> (Tokenizer, LanguageModel, LanguageModel, LanguageModel) {
    let tok = Tokenizer::from_texts(["ash bell cliff dune elm fern gale holt iris kelp loam moss"]);
    assert_eq!(tok.vocab_size(), 16);
    let mut rng = Rng::new(23);
    let cfg = LMConfig {
        n_layers: 2,
        n_heads: 2,
        d_model: 12,
        d_ff: 24,
        max_seq_len: 16,
        vocab_size: 16,
        size_tag: SizeTag::Small,
    };
    let mut base = LanguageModel::init(
        LMConfig {
            size_tag: SizeTag::Large,
            d_model: 16,
            d_ff: 32,
            ..cfg.clone()
        },
        &mut rng,
    )
    .unwrap();
    base.frozen = true;
    let mut frozen = LanguageModel::init(cfg.clone(), &mut rng).unwrap();
    frozen.frozen = true;
    let mut trainable = LanguageModel::init(cfg, &mut rng).unwrap();
    trainable.frozen = false;
    (tok, base, frozen, trainable)
}

fn toy_batch(
    tok: &Tokenizer,
    base: &LanguageModel,
    frozen: &LanguageModel,
    qa: &[(&str, &str)],
    alpha: f64,
    with_p_before: bool,
) -> Vec<PreparedExample> {
    qa.iter()
        .enumerate()
        .map(|(i, (q, a))| {
            let ex = QAExample {
                id: format!("toy-{i}"),
                subset: Subset::Forget,
                question: q.to_string(),
                answer: a.to_string(),
                paraphrased_answer: None,
                perturbed_answers: vec![],
                relabel_answer: None,
            };
            let mut pe = prepare_example(tok, &ex).unwrap();
            let sel = RowSel::Rows(pe.rows.clone());
            let l_m = base.logits_rows(&pe.ids, &sel).unwrap();
            let l_o = frozen.logits_rows(&pe.ids, &sel).unwrap();
            let mut c = l_m.clone();
            for (v, &o) in c.data_mut().iter_mut().zip(l_o.data()) {
                *v -= alpha * o;
            }
            pe.const_rows = Some(c);
            if with_p_before {
                let (n, vocab) = l_m.rows_cols();
                let mut p = Vec::with_capacity(n * vocab);
                for r in 0..n {
                    p.extend(softmax(l_m.row(r)));
                }
                pe.p_before = Some(Tensor::new(vec![n, vocab], p).unwrap());
            }
            pe
        })
        .collect()
}

#[test]
fn criterion_3_gradient_correctness() {
    let start = Instant::now();
    let (tok, base, frozen, mut model) = toy_world();
    let alpha = 1.0;
    let forget = toy_batch(
        &tok,
        &base,
        &frozen,
        &[("ash bell cliff", "dune elm"), ("fern gale", "holt iris kelp")],
        alpha,
        false,
    );
    let retain = toy_batch(
        &tok,
        &base,
        &frozen,
        &[("loam moss ash", "bell cliff"), ("dune fern", "gale holt")],
        alpha,
        true,
    );
    let f: Vec<&PreparedExample> = forget.iter().collect();
    let r: Vec<&PreparedExample> = retain.iter().collect();

    type Build<'a> =
        Box<dyn Fn(&mut Tape, &LanguageModel) -> delta_unlearn::autodiff::NodeId + 'a>;
    let losses: Vec<(&str, Build)> = vec![
        (
            "gradient_ascent",
            Box::new(|t: &mut Tape, m: &LanguageModel| {
                let nll = loss_ga(t, m, &f, alpha).unwrap();
                t.scale(nll, -1.0)
            }),
        ),
        (
            "gradient_difference",
            Box::new(|t: &mut Tape, m: &LanguageModel| {
                loss_gd(t, m, &f, &r, alpha, 0.8, &mut Vec::new()).unwrap()
            }),
        ),
        (
            "kl_minimization",
            Box::new(|t: &mut Tape, m: &LanguageModel| {
                loss_kl(t, m, &f, &r, alpha, 0.6).unwrap()
            }),
        ),
        (
            "data_relabeling",
            Box::new(|t: &mut Tape, m: &LanguageModel| {
                loss_relabel(t, m, &r, alpha).unwrap()
            }),
        ),
    ];

    let mut rng = Rng::new(5);
    for (name, build) in &losses {
        let grads = {
            let mut tape = Tape::new(&model.params, true);
            let loss = build(&mut tape, &model);
            tape.backward(loss).unwrap();
            tape.param_grads()
        };
        let value = |m: &LanguageModel| {
            let mut tape = Tape::new(&m.params, false);
            let loss = build(&mut tape, m);
            tape.value(loss).item()
        };
        let pids: Vec<_> = model.params.iter().map(|(id, _)| id).collect();
        for pid in pids {
            let idx = rng.gen_range(model.params.value(pid).len());
            let h = 1e-5;
            let orig = model.params.value(pid).data()[idx];
            model.params.get_mut(pid).value.data_mut()[idx] = orig + h;
            let up = value(&model);
            model.params.get_mut(pid).value.data_mut()[idx] = orig - h;
            let down = value(&model);
            model.params.get_mut(pid).value.data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads[pid.0].as_ref().map(|g| g.data()[idx]).unwrap_or(0.0);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "{name}: param {pid:?} idx {idx}: {analytic} vs {numeric}"
            );
        }
    }
    assert!(start.elapsed().as_secs() < 120, "criterion 3 exceeded 2 min");
    println!("criterion 3 (finite-difference gradients, all four losses): PASS");
}

// ---- criterion 4: metric oracles ----

/// Exhaustive longest-common-subsequence: enumerate every subsequence of
/// the shorter side and test membership in the other.
fn lcs_exhaustive(g: &[&str], r: &[&str]) -> usize {
    let (short, long) = if g.len() <= r.len() { (g, r) } else { (r, g) };
    let mut best = 0usize;
    for mask in 0u32..(1 << short.len()) {
        let sub: Vec<&str> = (0..short.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| short[i])
            .collect();
        if sub.len() <= best {
            continue;
        }
        let mut it = long.iter();
        if sub.iter().all(|w| it.any(|l| l == w)) {
            best = sub.len();
        }
    }
    best
}

#[test]
fn criterion_4_metric_oracles() {
    let start = Instant::now();

    // ROUGE-L recall vs exhaustive-subsequence LCS
    let words = ["ash", "bell", "cliff", "dune", "elm"];
    let mut rng = Rng::new(41);
    for _ in 0..1000 {
        let pick = |rng: &mut Rng| -> Vec<&str> {
            let n = 1 + rng.gen_range(8);
            (0..n).map(|_| words[rng.gen_range(words.len())]).collect()
        };
        let g = pick(&mut rng);
        let r = pick(&mut rng);
        let got = rouge_l_recall(&g.join(" "), &r.join(" ")).unwrap();
        let want = lcs_exhaustive(&g, &r) as f64 / r.len() as f64;
        assert!((got - want).abs() < 1e-15, "LCS mismatch: {g:?} vs {r:?}");
    }

    // answer probability vs explicit chain rule over full-sequence logits
    let (tok, base, _, _) = toy_world();
    let cases = [
        ("ash bell", "cliff dune elm"),
        ("fern", "gale"),
        ("holt iris kelp", "loam moss"),
    ];
    for (q, a) in cases {
        let got = answer_probability(&base, &tok, q, a).unwrap();
        let q_ids = tok.encode(q).unwrap();
        let a_ids = tok.encode(a).unwrap();
        let ids = tok.encode_qa(q, a).unwrap();
        let logits = base.logits_rows(&ids, &RowSel::All).unwrap();
        let sep = 1 + q_ids.len();
        let mut log_sum = 0.0;
        for (k, &t) in a_ids.iter().enumerate() {
            let p = softmax(logits.row(sep + k));
            log_sum += p[t as usize].ln();
        }
        let want = (log_sum / a_ids.len() as f64).exp();
        assert!((got.prob - want).abs() < 1e-12);
    }

    // truth-ratio normalization: range and monotonicity over random
    // probability configurations
    let mut prev: Option<(f64, f64, f64)> = None;
    for _ in 0..1000 {
        let ref_p = rng.next_f64().max(1e-6);
        let wrong: f64 = (0..3).map(|_| rng.next_f64().max(1e-6)).sum::<f64>() / 3.0;
        let r = wrong / ref_p;
        let forget = normalize_truth_ratio(r, Subset::Forget);
        let retain = normalize_truth_ratio(r, Subset::Retain);
        assert!((0.0..=1.0).contains(&forget) && (0.0..=1.0).contains(&retain));
        if let Some((pr, pf, pt)) = prev {
            if r > pr {
                assert!(forget >= pf - 1e-12, "forget score must grow with R");
                assert!(retain <= pt + 1e-12, "retain score must fall with R");
            }
        }
        prev = Some((r, forget, retain));
    }

    assert!(start.elapsed().as_secs() < 120, "criterion 4 exceeded 2 min");
    println!("criterion 4 (ROUGE / probability / truth-ratio oracles): PASS");
}

// ---- criterion 5: end-to-end trend reproduction ----

#[test]
fn criterion_5_end_to_end_trends() {
    let sh = shared();
    assert!(
        sh.memorize.forget_rouge >= 0.90,
        "(a) memorized forget ROUGE {:.3} < 0.90",
        sh.memorize.forget_rouge
    );
    assert!(
        sh.retrain.forget_rouge <= sh.memorize.forget_rouge - 0.30,
        "(b) retrained forget ROUGE {:.3} not 30 points below memorized {:.3}",
        sh.retrain.forget_rouge,
        sh.memorize.forget_rouge
    );
    assert!(
        (sh.retrain.retain_rouge - sh.memorize.retain_rouge).abs() <= 0.10,
        "(b) retrained retain ROUGE {:.3} not within 10 points of memorized {:.3}",
        sh.retrain.retain_rouge,
        sh.memorize.retain_rouge
    );
    assert!(
        (sh.ga_final_forget - sh.retrain.forget_rouge).abs() <= ROUGE_TOLERANCE,
        "(c) matched GA forget ROUGE {:.3} not within ±3 points of target {:.3}",
        sh.ga_final_forget,
        sh.retrain.forget_rouge
    );
    assert!(
        sh.elapsed_secs < 1800.0,
        "pipeline took {:.0}s, over the 30 min budget",
        sh.elapsed_secs
    );
    println!(
        "criterion 5 (trend reproduction: memorized {:.3} -> retrained {:.3}, GA matched {:.3}, {:.0}s): PASS",
        sh.memorize.forget_rouge, sh.retrain.forget_rouge, sh.ga_final_forget, sh.elapsed_secs
    );
}

// ---- criterion 6: trajectory ordering ----

#[test]
fn criterion_6_trajectory_ordering() {
    let sh = shared();
    let dirs = sh.cfg.dirs().unwrap();
    let csv = std::fs::read_to_string(
        dirs.reports.join("trajectory_gradient_ascent_offset.csv"),
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let (first, last) = (&rows[0], rows.last().unwrap());
    // columns: step, loss, forget, retain, real, world
    let drop = |col: usize| first[col] - last[col];
    let (forget_drop, retain_drop, world_drop) = (drop(2), drop(3), drop(5));
    assert!(
        forget_drop >= retain_drop && retain_drop >= world_drop,
        "drop ordering violated: forget {forget_drop:.3}, retain {retain_drop:.3}, world {world_drop:.3}"
    );
    assert!(
        world_drop < 0.15,
        "world-analog ROUGE dropped {world_drop:.3} ≥ 15 points"
    );
    println!(
        "criterion 6 (trajectory drops forget {forget_drop:.3} ≥ retain {retain_drop:.3} ≥ world {world_drop:.3} < 0.15): PASS"
    );
}

// ---- criterion 7: alpha-sweep shape ----

#[test]
fn criterion_7_alpha_sweep_shape() {
    let sh = shared();
    let start = Instant::now();
    let mut cfg = sh.cfg.clone();
    // full-subset generation at five alphas is the expensive part; a
    // strided subsample keeps the shape and the budget
    cfg.eval.max_examples_per_subset = Some(25);
    let rows = cmd_sweep(&cfg, &sh.ga_checkpoint, Some(&[0.0, 0.5, 1.0, 2.0, 5.0])).unwrap();
    let at = |alpha: f64| rows.iter().find(|r| r.alpha == alpha).unwrap();
    let (a0, a1, a5) = (at(0.0), at(1.0), at(5.0));
    assert!(
        a0.forget > a1.forget,
        "forget ROUGE at α=0 ({:.3}) must exceed α=1 ({:.3})",
        a0.forget,
        a1.forget
    );
    for (name, v1, v5) in [
        ("forget", a1.forget, a5.forget),
        ("retain", a1.retain, a5.retain),
        ("real_analog", a1.real_analog, a5.real_analog),
        ("world_analog", a1.world_analog, a5.world_analog),
    ] {
        assert!(
            v5 < v1,
            "{name} ROUGE at α=5 ({v5:.3}) must fall below α=1 ({v1:.3})"
        );
    }
    assert!(start.elapsed().as_secs() < 600, "criterion 7 exceeded 10 min");
    println!(
        "criterion 7 (α sweep: forget {:.3}@0 > {:.3}@1, everything collapses at α=5): PASS",
        a0.forget, a1.forget
    );
}

// ---- criterion 8: algorithm plurality ----

#[test]
fn criterion_8_algorithm_plurality() {
    let sh = shared();
    let dirs = sh.cfg.dirs().unwrap();
    let splits = delta_unlearn::corpus::DatasetSplits::load(&dirs.data).unwrap();
    let tok = Tokenizer::load(&dirs.tokenizer()).unwrap();

    let mean_forget_prob = |ens: &OffsetEnsemble| -> f64 {
        let examples = subsample(&splits.forget, None);
        let sum: f64 = examples
            .iter()
            .map(|ex| {
                answer_probability(ens, &tok, &ex.question, &ex.answer)
                    .unwrap()
                    .prob
            })
            .sum();
        sum / examples.len() as f64
    };
    let before_prob = mean_forget_prob(&build_ensemble(&sh.cfg, None, 1.0).unwrap());

    for algorithm in [
        Algorithm::GradientDifference,
        Algorithm::KlMinimization,
        Algorithm::DataRelabeling,
    ] {
        let mut cfg = sh.cfg.clone();
        cfg.unlearn.algorithm = algorithm;
        let stage = cmd_unlearn(&cfg, LrChoice::MatchTarget(None)).unwrap();
        let achieved = stage.outcome.trajectory.last().unwrap().forget_rouge;
        assert!(
            (achieved - sh.retrain.forget_rouge).abs() <= ROUGE_TOLERANCE,
            "{}: matched forget ROUGE {achieved:.3} not within ±3 points of target {:.3}",
            algorithm.key(),
            sh.retrain.forget_rouge
        );
        frozen_files_unchanged(sh);

        if algorithm == Algorithm::DataRelabeling {
            let after =
                mean_forget_prob(&build_ensemble(&sh.cfg, Some(&stage.checkpoint), 1.0).unwrap());
            assert!(
                after > 0.5 * before_prob,
                "relabeling dropped original-answer probability to {after:.3}, below 0.5 × {before_prob:.3}"
            );
        }
    }
    println!("criterion 8 (GD/KL/relabel matched to target; relabel keeps P(original) high): PASS");
}

// ---- criterion 9: determinism of the reproduction command ----

/// Small-but-real scale: big enough that memorization and the lr search
/// behave, small enough to run twice inside the suite.
fn repro_config(root: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.out_dir = root.to_path_buf();
    cfg.seed = 13;
    cfg.corpus = CorpusParams {
        n_authors: 20,
        qa_per_author: 3,
        forget_fraction: 0.1,
        k_perturbed: 2,
    };
    cfg.model = ModelParams {
        max_seq_len: 48,
        large: SizeSpec {
            n_layers: 1,
            n_heads: 2,
            d_model: 32,
            d_ff: 64,
        },
        small: SizeSpec {
            n_layers: 1,
            n_heads: 2,
            d_model: 16,
            d_ff: 32,
        },
    };
    cfg.pretrain = StageParams {
        epochs: 6,
        batch_size: 16,
        learning_rate: 3e-3,
    };
    cfg.memorize = MemorizeParams {
        epochs: 20,
        batch_size: 16,
        learning_rate: 3e-3,
        memorize_offset: true,
    };
    cfg.retrain = StageParams {
        epochs: 20,
        batch_size: 16,
        learning_rate: 3e-3,
    };
    cfg.unlearn.epochs = 3;
    cfg.unlearn.batch_size = 4;
    cfg.unlearn.trajectory_samples = 5;
    cfg.unlearn.max_new_tokens = 12;
    cfg.eval.max_examples_per_subset = Some(5);
    cfg.eval.max_new_tokens = 12;
    cfg.eval.alphas = vec![0.0, 1.0, 5.0];
    cfg
}

#[test]
fn criterion_9_repro_determinism() {
    let artifacts = [
        "data/forget.jsonl",
        "data/retain.jsonl",
        "data/real_analog.jsonl",
        "data/world_analog.jsonl",
        "data/general_heldout.jsonl",
        "reports/trajectory_gradient_ascent_offset.csv",
        "reports/eval_before.json",
        "reports/eval_after.json",
        "reports/sweep.csv",
    ];
    let run = |seed_dir: &TempDir| -> Vec<Vec<u8>> {
        let cfg = repro_config(seed_dir.path());
        cmd_repro(&cfg).unwrap();
        artifacts
            .iter()
            .map(|rel| std::fs::read(seed_dir.path().join(rel)).unwrap())
            .collect()
    };
    let (da, db) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let first = run(&da);
    let second = run(&db);
    for ((a, b), rel) in first.iter().zip(&second).zip(&artifacts) {
        assert_eq!(a, b, "artifact {rel} differs between identical runs");
    }
    println!("criterion 9 (repro run twice is byte-identical): PASS");
}

// ---- CLI smoke test (exit codes and artifact plumbing) ----

#[test]
fn cli_smoke() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_delta-unlearn");
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("run");

    let ok = Command::new(bin)
        .args(["gen-data", "--out-dir"])
        .arg(&out)
        .args(["--seed", "3", "--n-authors", "20", "--qa-per-author", "2", "--k-perturbed", "2"])
        .output()
        .unwrap();
    assert!(ok.status.success(), "gen-data failed: {ok:?}");
    assert!(out.join("data/forget.jsonl").is_file());

    // bad configuration exits with code 2
    let bad = Command::new(bin)
        .args(["gen-data", "--out-dir"])
        .arg(&out)
        .args(["--n-authors", "3"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2), "config error must exit 2");
    println!("cli smoke (gen-data succeeds, config error exits 2): PASS");
}

// keep an eye on digest plumbing: two identical tiny models serialize to
// the same digest, so the byte comparisons above are meaningful
#[test]
fn checkpoint_digest_sanity() {
    let mut rng = Rng::new(3);
    let cfg = LMConfig {
        n_layers: 1,
        n_heads: 1,
        d_model: 8,
        d_ff: 16,
        max_seq_len: 8,
        vocab_size: 16,
        size_tag: SizeTag::Small,
    };
    let m = LanguageModel::init(cfg, &mut rng).unwrap();
    assert_eq!(model_digest(&m, &[0; 32]), model_digest(&m.clone(), &[0; 32]));
    println!("checkpoint digest sanity: PASS");
}
