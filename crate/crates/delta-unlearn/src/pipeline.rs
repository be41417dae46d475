//! Stage orchestration: resolved run configuration, the fixed output
//! layout, and one function per pipeline stage (data generation,
//! pretraining, memorization, retraining, unlearning, evaluation,
//! the α sweep, and the full reproduction run).

use crate::corpus::{check_vocabulary, generate_corpus, pools, DatasetSplits, Subset};
use crate::ensemble::OffsetEnsemble;
use crate::error::{Error, Result};
use crate::eval::{
    alpha_sweep, evaluate, mean_rouge, subsample, sweep_to_csv, tradeoff_curve,
    trajectory_to_csv, EvalOptions, EvalReport, SweepRow,
};
use crate::lm::checkpoint::{load as load_checkpoint, model_digest, save as save_checkpoint};
use crate::lm::{LMConfig, LanguageModel, SizeTag, Tokenizer};
use crate::rng::Rng;
use crate::unlearn::{
    direct_finetune_run, finetune, match_target_by_lr, retrain_baseline, unlearn_run,
    FinetuneConfig, Mode, UnlearnConfig, UnlearnOutcome,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

// ---- configuration ----

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusParams {
    pub n_authors: usize,
    pub qa_per_author: usize,
    pub forget_fraction: f64,
    pub k_perturbed: usize,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            n_authors: 40,
            qa_per_author: 10,
            forget_fraction: 0.05,
            k_perturbed: 3,
        }
    }
}

/// Architecture of one model size; vocabulary size is filled in from the
/// tokenizer at build time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizeSpec {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub max_seq_len: usize,
    pub large: SizeSpec,
    pub small: SizeSpec,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            max_seq_len: 48,
            large: SizeSpec {
                n_layers: 3,
                n_heads: 4,
                d_model: 96,
                d_ff: 192,
            },
            small: SizeSpec {
                n_layers: 2,
                n_heads: 2,
                d_model: 48,
                d_ff: 96,
            },
        }
    }
}

impl ModelParams {
    pub fn config(&self, tag: SizeTag, vocab_size: usize) -> LMConfig {
        let spec = match tag {
            SizeTag::Large => &self.large,
            SizeTag::Small => &self.small,
        };
        LMConfig {
            n_layers: spec.n_layers,
            n_heads: spec.n_heads,
            d_model: spec.d_model,
            d_ff: spec.d_ff,
            max_seq_len: self.max_seq_len,
            vocab_size,
            size_tag: tag,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct StageParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for StageParams {
    fn default() -> Self {
        StageParams {
            epochs: 30,
            batch_size: 32,
            learning_rate: 3e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MemorizeParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Whether the offset initialization M_o also memorizes the
    /// fictitious set; configurable because either reading is plausible.
    pub memorize_offset: bool,
}

impl Default for MemorizeParams {
    fn default() -> Self {
        MemorizeParams {
            epochs: 60,
            batch_size: 32,
            learning_rate: 3e-3,
            memorize_offset: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub tolerance: f64,
    pub lr_lo: f64,
    pub lr_hi: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            tolerance: crate::unlearn::DEFAULT_TOLERANCE,
            lr_lo: 1e-5,
            lr_hi: 1e-1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub max_examples_per_subset: Option<usize>,
    pub max_new_tokens: usize,
    /// Inference-time α grid for the sweep stage.
    pub alphas: Vec<f64>,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            max_examples_per_subset: None,
            max_new_tokens: 24,
            alphas: vec![0.0, 0.5, 1.0, 2.0, 5.0],
        }
    }
}

/// The resolved configuration of one run. Every stage writes this beside
/// its outputs so artifacts are self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub corpus: CorpusParams,
    pub model: ModelParams,
    pub pretrain: StageParams,
    pub memorize: MemorizeParams,
    pub retrain: StageParams,
    pub unlearn: UnlearnConfig,
    pub search: SearchParams,
    pub eval: EvalParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            out_dir: PathBuf::from("runs/default"),
            corpus: CorpusParams::default(),
            model: ModelParams::default(),
            pretrain: StageParams::default(),
            memorize: MemorizeParams::default(),
            retrain: StageParams {
                epochs: MemorizeParams::default().epochs,
                ..StageParams::default()
            },
            // the library-default batch of 32 swallows the whole desk-scale
            // forget set in one step; 4 gives the lr search a smooth
            // dose-response to bisect
            unlearn: UnlearnConfig {
                batch_size: 4,
                ..UnlearnConfig::default()
            },
            search: SearchParams::default(),
            eval: EvalParams::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("unserializable config: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Named sub-seed derived from the global seed, so stages can be
    /// reproduced independently.
    pub fn stage_seed(&self, label: &str) -> u64 {
        Rng::new(self.seed).sub(label).next_u64()
    }

    pub fn dirs(&self) -> Result<OutDirs> {
        OutDirs::create(&self.out_dir)
    }

    fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            max_examples_per_subset: self.eval.max_examples_per_subset,
            max_new_tokens: self.eval.max_new_tokens,
            ..EvalOptions::default()
        }
    }
}

// ---- output layout ----

#[derive(Debug, Clone)]
pub struct OutDirs {
    pub root: PathBuf,
    pub checkpoints: PathBuf,
    pub data: PathBuf,
    pub reports: PathBuf,
    pub logs: PathBuf,
}

impl OutDirs {
    pub fn create(root: &Path) -> Result<Self> {
        let dirs = OutDirs {
            root: root.to_path_buf(),
            checkpoints: root.join("checkpoints"),
            data: root.join("data"),
            reports: root.join("reports"),
            logs: root.join("logs"),
        };
        for d in [&dirs.root, &dirs.checkpoints, &dirs.data, &dirs.reports, &dirs.logs] {
            std::fs::create_dir_all(d)?;
        }
        Ok(dirs)
    }

    pub fn tokenizer(&self) -> PathBuf {
        self.checkpoints.join("tokenizer.json")
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.checkpoints.join(format!("{name}.ckpt"))
    }
}

// ---- manifests ----

/// Per-stage run manifest. The timestamp lives only here, never in the
/// data, trajectory, or report artifacts, which stay byte-reproducible.
#[derive(Debug, Serialize)]
struct StageManifest<'a> {
    stage: &'a str,
    unix_time_ms: u128,
    config: &'a RunConfig,
    digests: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chosen_lr: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    lr_trials: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

fn hex(bytes: &[u8; 32]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

fn write_manifest(
    dirs: &OutDirs,
    cfg: &RunConfig,
    stage: &str,
    digests: BTreeMap<String, String>,
    chosen_lr: Option<f64>,
    lr_trials: Vec<(f64, f64)>,
    warnings: Vec<String>,
) -> Result<()> {
    let manifest = StageManifest {
        stage,
        unix_time_ms: now_ms(),
        config: cfg,
        digests,
        chosen_lr,
        lr_trials,
        warnings,
    };
    let path = dirs.logs.join(format!("manifest_{stage}.json"));
    let f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(f, &manifest)?;
    Ok(())
}

// ---- shared artifact access ----

fn load_splits(dirs: &OutDirs) -> Result<DatasetSplits> {
    DatasetSplits::load(&dirs.data)
}

fn load_tokenizer(dirs: &OutDirs) -> Result<Tokenizer> {
    Tokenizer::load(&dirs.tokenizer())
}

/// Load a checkpoint and pin it to the current tokenizer.
fn load_model(
    dirs: &OutDirs,
    name: &str,
    tag: SizeTag,
    tok: &Tokenizer,
    frozen: bool,
) -> Result<LanguageModel> {
    let ckpt = load_checkpoint(&dirs.checkpoint(name), Some(tag))?;
    if ckpt.tokenizer_digest != tok.digest() {
        return Err(Error::Compatibility(format!(
            "checkpoint {name} was trained against a different tokenizer"
        )));
    }
    let mut model = ckpt.model;
    model.frozen = frozen;
    Ok(model)
}

/// The "before unlearning" ensemble: memorized M, memorized M_o, and a
/// trainable copy (or an explicitly supplied trained offset checkpoint).
pub fn build_ensemble(
    cfg: &RunConfig,
    offset_checkpoint: Option<&Path>,
    alpha: f64,
) -> Result<OffsetEnsemble> {
    let dirs = cfg.dirs()?;
    let tok = load_tokenizer(&dirs)?;
    let base = load_model(&dirs, "memorized_large", SizeTag::Large, &tok, true)?;
    let frozen = load_model(&dirs, "memorized_small", SizeTag::Small, &tok, true)?;
    let ens = OffsetEnsemble::from_pair(base, frozen, alpha, tok.digest())?;
    match offset_checkpoint {
        Some(path) => ens.swap_offset_pair(load_checkpoint(path, Some(SizeTag::Small))?),
        None => Ok(ens),
    }
}

/// The generic text mix both sizes pretrain on, and the control material
/// replayed during memorize/retrain so control knowledge survives.
fn control_mix(splits: &DatasetSplits) -> Vec<crate::corpus::QAExample> {
    splits.control().cloned().collect()
}

fn mean_forget_retain(
    model: &LanguageModel,
    tok: &Tokenizer,
    splits: &DatasetSplits,
    cfg: &RunConfig,
) -> Result<(f64, f64)> {
    let samples = Some(cfg.unlearn.trajectory_samples);
    let forget = subsample(splits.subset(Subset::Forget), samples);
    let retain = subsample(splits.subset(Subset::Retain), samples);
    Ok((
        mean_rouge(model, tok, &forget, cfg.unlearn.max_new_tokens)?,
        mean_rouge(model, tok, &retain, cfg.unlearn.max_new_tokens)?,
    ))
}

// ---- stages ----

/// Generate the corpus, build the tokenizer over it, and persist both.
pub fn cmd_gen_data(cfg: &RunConfig) -> Result<DatasetSplits> {
    let dirs = cfg.dirs()?;
    let splits = generate_corpus(
        cfg.corpus.n_authors,
        cfg.corpus.qa_per_author,
        cfg.corpus.forget_fraction,
        cfg.corpus.k_perturbed,
        cfg.stage_seed("corpus"),
    )?;
    splits.save(&dirs.data)?;

    // vocabulary covers the dataset plus every abstention template
    let mut texts = splits.all_texts();
    texts.extend(pools::ABSTENTION_POOL.iter().copied());
    let tok = Tokenizer::from_texts(texts);
    check_vocabulary(&splits, &tok)?;
    tok.save(&dirs.tokenizer())?;
    cfg.save(&dirs.root.join("run_config.toml"))?;

    let mut digests = BTreeMap::new();
    digests.insert("tokenizer".into(), hex(&tok.digest()));
    write_manifest(&dirs, cfg, "gen_data", digests, None, vec![], vec![])?;
    Ok(splits)
}

/// Train both sizes from scratch on the control mix so they are fluent
/// (and know the control facts) before the memorize stage.
pub fn cmd_pretrain(cfg: &RunConfig) -> Result<()> {
    let dirs = cfg.dirs()?;
    let splits = load_splits(&dirs)?;
    let tok = load_tokenizer(&dirs)?;
    let mix = control_mix(&splits);
    let stage = FinetuneConfig {
        epochs: cfg.pretrain.epochs,
        batch_size: cfg.pretrain.batch_size,
        learning_rate: cfg.pretrain.learning_rate,
        seed: cfg.stage_seed("pretrain"),
    };

    let mut digests = BTreeMap::new();
    for (tag, name, init_label) in [
        (SizeTag::Large, "pretrained_large", "init_large"),
        (SizeTag::Small, "pretrained_small", "init_small"),
    ] {
        let mut rng = Rng::new(cfg.stage_seed(init_label));
        let mut model =
            LanguageModel::init(cfg.model.config(tag, tok.vocab_size()), &mut rng)?;
        finetune(&mut model, &tok, &mix, &stage)?;
        save_checkpoint(&model, &tok.digest(), &dirs.checkpoint(name))?;
        digests.insert(name.into(), hex(&model_digest(&model, &tok.digest())));
    }
    write_manifest(&dirs, cfg, "pretrain", digests, None, vec![], vec![])?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemorizeReport {
    pub forget_rouge: f64,
    pub retain_rouge: f64,
}

/// Fine-tune the pretrained models on the full fictitious set (plus the
/// control replay), producing the "before unlearning" state.
pub fn cmd_memorize(cfg: &RunConfig) -> Result<MemorizeReport> {
    let dirs = cfg.dirs()?;
    let splits = load_splits(&dirs)?;
    let tok = load_tokenizer(&dirs)?;
    let mut examples: Vec<_> = splits.fictitious().cloned().collect();
    examples.extend(control_mix(&splits));
    let stage = FinetuneConfig {
        epochs: cfg.memorize.epochs,
        batch_size: cfg.memorize.batch_size,
        learning_rate: cfg.memorize.learning_rate,
        seed: cfg.stage_seed("memorize"),
    };

    let mut large = load_model(&dirs, "pretrained_large", SizeTag::Large, &tok, false)?;
    finetune(&mut large, &tok, &examples, &stage)?;
    save_checkpoint(&large, &tok.digest(), &dirs.checkpoint("memorized_large"))?;

    let mut small = load_model(&dirs, "pretrained_small", SizeTag::Small, &tok, false)?;
    if cfg.memorize.memorize_offset {
        finetune(&mut small, &tok, &examples, &stage)?;
    }
    save_checkpoint(&small, &tok.digest(), &dirs.checkpoint("memorized_small"))?;

    let (forget_rouge, retain_rouge) = mean_forget_retain(&large, &tok, &splits, cfg)?;
    let report = MemorizeReport {
        forget_rouge,
        retain_rouge,
    };
    let f = std::io::BufWriter::new(std::fs::File::create(
        dirs.reports.join("memorize_report.json"),
    )?);
    serde_json::to_writer_pretty(f, &report)?;

    let mut digests = BTreeMap::new();
    digests.insert(
        "memorized_large".into(),
        hex(&model_digest(&large, &tok.digest())),
    );
    digests.insert(
        "memorized_small".into(),
        hex(&model_digest(&small, &tok.digest())),
    );
    write_manifest(&dirs, cfg, "memorize", digests, None, vec![], vec![])?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrainReport {
    /// The matching target for unlearning runs.
    pub forget_rouge: f64,
    pub retain_rouge: f64,
}

/// The gold standard: fine-tune the PRE-memorize base on everything
/// except the forget set. Its forget ROUGE becomes the matching target.
pub fn cmd_retrain(cfg: &RunConfig) -> Result<RetrainReport> {
    let dirs = cfg.dirs()?;
    let splits = load_splits(&dirs)?;
    let tok = load_tokenizer(&dirs)?;
    let base = load_model(&dirs, "pretrained_large", SizeTag::Large, &tok, false)?;
    let stage = FinetuneConfig {
        epochs: cfg.retrain.epochs,
        batch_size: cfg.retrain.batch_size,
        learning_rate: cfg.retrain.learning_rate,
        seed: cfg.stage_seed("retrain"),
    };
    let replay = control_mix(&splits);
    let model = retrain_baseline(&base, &tok, &splits, &replay, &stage)?;
    save_checkpoint(&model, &tok.digest(), &dirs.checkpoint("retrained"))?;

    let (forget_rouge, retain_rouge) = mean_forget_retain(&model, &tok, &splits, cfg)?;
    let report = RetrainReport {
        forget_rouge,
        retain_rouge,
    };
    let f = std::io::BufWriter::new(std::fs::File::create(
        dirs.reports.join("retrain_target.json"),
    )?);
    serde_json::to_writer_pretty(f, &report)?;

    let mut digests = BTreeMap::new();
    digests.insert("retrained".into(), hex(&model_digest(&model, &tok.digest())));
    write_manifest(&dirs, cfg, "retrain", digests, None, vec![], vec![])?;
    Ok(report)
}

/// How the unlearning learning rate is chosen.
#[derive(Debug, Clone, Copy)]
pub enum LrChoice {
    Fixed(f64),
    /// Match the retraining baseline's forget ROUGE; `None` reads the
    /// target from `reports/retrain_target.json`.
    MatchTarget(Option<f64>),
}

pub struct UnlearnStageOutcome {
    pub outcome: UnlearnOutcome,
    pub checkpoint: PathBuf,
    pub chosen_lr: f64,
    pub lr_trials: Vec<(f64, f64)>,
}

fn read_retrain_target(dirs: &OutDirs) -> Result<f64> {
    let path = dirs.reports.join("retrain_target.json");
    let f = std::fs::File::open(&path).map_err(|_| {
        Error::Config(format!(
            "{} not found; run the retrain stage first or pass an explicit target",
            path.display()
        ))
    })?;
    let report: RetrainReport = serde_json::from_reader(std::io::BufReader::new(f))?;
    Ok(report.forget_rouge)
}

/// Run one unlearning arm end to end: choose the lr (fixed or matched),
/// train, and persist the checkpoint, trajectory, and trade-off curve.
pub fn cmd_unlearn(cfg: &RunConfig, lr: LrChoice) -> Result<UnlearnStageOutcome> {
    let dirs = cfg.dirs()?;
    let splits = load_splits(&dirs)?;
    let tok = load_tokenizer(&dirs)?;
    let mut ucfg = cfg.unlearn.clone();
    // the stage seed folds the global seed into whatever offset the
    // config carries
    ucfg.seed = cfg.stage_seed("unlearn").wrapping_add(ucfg.seed);

    let mut warnings = Vec::new();
    let mut lr_trials = Vec::new();
    let (outcome, chosen_lr) = match ucfg.mode {
        Mode::Direct => {
            let LrChoice::Fixed(rate) = lr else {
                return Err(Error::Config(
                    "target matching drives the offset ensemble; direct mode needs --lr".into(),
                ));
            };
            ucfg.learning_rate = rate;
            let base = load_model(&dirs, "memorized_large", SizeTag::Large, &tok, true)?;
            (direct_finetune_run(&base, &tok, &splits, &ucfg)?, rate)
        }
        Mode::Offset => {
            let ens = build_ensemble(cfg, None, ucfg.alpha_train)?;
            match lr {
                LrChoice::Fixed(rate) => ucfg.learning_rate = rate,
                LrChoice::MatchTarget(target) => {
                    let target = match target {
                        Some(t) => t,
                        None => read_retrain_target(&dirs)?,
                    };
                    let search = match_target_by_lr(
                        &ens,
                        &tok,
                        &splits,
                        &ucfg,
                        target,
                        cfg.search.tolerance,
                        (cfg.search.lr_lo, cfg.search.lr_hi),
                    )?;
                    lr_trials = search.trials;
                    warnings.extend(search.warning);
                    ucfg = search.config;
                }
            }
            let rate = ucfg.learning_rate;
            (unlearn_run(&ens, &tok, &splits, &ucfg)?, rate)
        }
    };
    warnings.extend(outcome.warnings.iter().cloned());

    let label = format!(
        "{}_{}",
        ucfg.algorithm.key(),
        match ucfg.mode {
            Mode::Offset => "offset",
            Mode::Direct => "direct",
        }
    );
    let checkpoint = dirs.checkpoint(&format!("unlearned_{label}"));
    save_checkpoint(&outcome.model, &tok.digest(), &checkpoint)?;
    std::fs::write(
        dirs.reports.join(format!("trajectory_{label}.csv")),
        trajectory_to_csv(&outcome.trajectory),
    )?;
    std::fs::write(
        dirs.reports.join(format!("tradeoff_{label}.csv")),
        tradeoff_curve(&outcome.trajectory),
    )?;

    let mut digests = BTreeMap::new();
    digests.insert(
        format!("unlearned_{label}"),
        hex(&model_digest(&outcome.model, &tok.digest())),
    );
    write_manifest(
        &dirs,
        cfg,
        &format!("unlearn_{label}"),
        digests,
        Some(chosen_lr),
        lr_trials.clone(),
        warnings,
    )?;
    Ok(UnlearnStageOutcome {
        outcome,
        checkpoint,
        chosen_lr,
        lr_trials,
    })
}

/// Full metric report for an ensemble; `offset_checkpoint` of `None`
/// evaluates the before-unlearning state (zero offset).
pub fn cmd_eval(
    cfg: &RunConfig,
    offset_checkpoint: Option<&Path>,
    alpha: Option<f64>,
    label: &str,
) -> Result<EvalReport> {
    let dirs = cfg.dirs()?;
    let splits = load_splits(&dirs)?;
    let tok = load_tokenizer(&dirs)?;
    let ens = build_ensemble(cfg, offset_checkpoint, alpha.unwrap_or(cfg.unlearn.alpha_train))?;
    let mut report = evaluate(&ens, &tok, &splits, &cfg.eval_options())?;
    report.manifest = Some(format!("manifest_eval_{label}.json"));
    report.save_json(&dirs.reports.join(format!("eval_{label}.json")))?;
    report.save_csv(&dirs.reports.join(format!("eval_{label}.csv")))?;

    let (base_digest, frozen_digest) = ens.frozen_digests();
    let mut digests = BTreeMap::new();
    digests.insert("base".into(), hex(&base_digest));
    digests.insert("offset_frozen".into(), hex(&frozen_digest));
    write_manifest(
        &dirs,
        cfg,
        &format!("eval_{label}"),
        digests,
        None,
        vec![],
        vec![],
    )?;
    Ok(report)
}

/// Per-subset ROUGE across the inference-time α grid for a trained
/// offset checkpoint.
pub fn cmd_sweep(
    cfg: &RunConfig,
    offset_checkpoint: &Path,
    alphas: Option<&[f64]>,
) -> Result<Vec<SweepRow>> {
    let dirs = cfg.dirs()?;
    let splits = load_splits(&dirs)?;
    let tok = load_tokenizer(&dirs)?;
    let ens = build_ensemble(cfg, Some(offset_checkpoint), cfg.unlearn.alpha_train)?;
    let grid = alphas.unwrap_or(&cfg.eval.alphas);
    let rows = alpha_sweep(&ens, &tok, &splits, grid, &cfg.eval_options())?;
    std::fs::write(dirs.reports.join("sweep.csv"), sweep_to_csv(&rows))?;
    write_manifest(&dirs, cfg, "sweep", BTreeMap::new(), None, vec![], vec![])?;
    Ok(rows)
}

/// The full pipeline with one command: data → pretrain → memorize →
/// retrain → target-matched unlearning → evaluation → α sweep.
pub fn cmd_repro(cfg: &RunConfig) -> Result<()> {
    cmd_gen_data(cfg)?;
    cmd_pretrain(cfg)?;
    cmd_memorize(cfg)?;
    cmd_retrain(cfg)?;
    let stage = cmd_unlearn(cfg, LrChoice::MatchTarget(None))?;
    cmd_eval(cfg, None, None, "before")?;
    cmd_eval(cfg, Some(&stage.checkpoint), None, "after")?;
    cmd_sweep(cfg, &stage.checkpoint, None)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    /// A deliberately tiny configuration so pipeline plumbing tests run
    /// in seconds; trend quality is not asserted here.
    fn tiny_config(root: &Path) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.out_dir = root.to_path_buf();
        cfg.corpus = CorpusParams {
            n_authors: 20,
            qa_per_author: 2,
            forget_fraction: 0.1,
            k_perturbed: 2,
        };
        cfg.model = ModelParams {
            max_seq_len: 48,
            large: SizeSpec {
                n_layers: 1,
                n_heads: 2,
                d_model: 24,
                d_ff: 48,
            },
            small: SizeSpec {
                n_layers: 1,
                n_heads: 2,
                d_model: 16,
                d_ff: 32,
            },
        };
        cfg.pretrain = StageParams {
            epochs: 2,
            batch_size: 16,
            learning_rate: 3e-3,
        };
        cfg.memorize = MemorizeParams {
            epochs: 3,
            batch_size: 16,
            learning_rate: 3e-3,
            memorize_offset: true,
        };
        cfg.retrain = StageParams {
            epochs: 3,
            batch_size: 16,
            learning_rate: 3e-3,
        };
        cfg.unlearn.epochs = 1;
        cfg.unlearn.trajectory_samples = 3;
        cfg.unlearn.max_new_tokens = 8;
        cfg.eval.max_examples_per_subset = Some(3);
        cfg.eval.max_new_tokens = 8;
        cfg.eval.alphas = vec![0.0, 1.0];
        cfg
    }

    #[test]
    fn config_round_trips_through_toml() {
        let dir = TempDir::new().unwrap();
        let cfg = RunConfig::default();
        let path = dir.path().join("cfg.toml");
        cfg.save(&path).unwrap();
        let loaded = RunConfig::load(&path).unwrap();
        assert_eq!(
            serde_json::to_string(&cfg).unwrap(),
            serde_json::to_string(&loaded).unwrap()
        );
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "seed = 11\n[corpus]\nn_authors = 24\n").unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.corpus.n_authors, 24);
        assert_eq!(cfg.corpus.qa_per_author, 10);
        assert_eq!(cfg.model.large.d_model, ModelParams::default().large.d_model);
    }

    #[test]
    fn malformed_toml_is_a_config_error() {
        let dir = TempDir::new().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "seed = \"not a number\"\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
    }

    #[test]
    fn tiny_pipeline_produces_the_fixed_layout() {
        let dir = TempDir::new().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_gen_data(&cfg).unwrap();
        cmd_pretrain(&cfg).unwrap();
        cmd_memorize(&cfg).unwrap();
        cmd_retrain(&cfg).unwrap();
        let stage = cmd_unlearn(&cfg, LrChoice::Fixed(1e-3)).unwrap();
        let report = cmd_eval(&cfg, Some(&stage.checkpoint), None, "after").unwrap();
        assert_eq!(report.rows.len(), 5);
        let rows = cmd_sweep(&cfg, &stage.checkpoint, None).unwrap();
        assert_eq!(rows.len(), 2);

        let dirs = cfg.dirs().unwrap();
        for rel in [
            "run_config.toml",
            "data/forget.jsonl",
            "data/splits.json",
            "checkpoints/tokenizer.json",
            "checkpoints/pretrained_large.ckpt",
            "checkpoints/pretrained_small.ckpt",
            "checkpoints/memorized_large.ckpt",
            "checkpoints/memorized_small.ckpt",
            "checkpoints/retrained.ckpt",
            "checkpoints/unlearned_gradient_ascent_offset.ckpt",
            "reports/memorize_report.json",
            "reports/retrain_target.json",
            "reports/trajectory_gradient_ascent_offset.csv",
            "reports/tradeoff_gradient_ascent_offset.csv",
            "reports/eval_after.json",
            "reports/eval_after.csv",
            "reports/sweep.csv",
            "logs/manifest_gen_data.json",
            "logs/manifest_unlearn_gradient_ascent_offset.json",
        ] {
            assert!(dirs.root.join(rel).is_file(), "missing {rel}");
        }
    }

    #[test]
    fn rerunning_stages_reproduces_data_and_reports_byte_identically() {
        let dir = TempDir::new().unwrap();
        let cfg = tiny_config(dir.path());
        let run = |cfg: &RunConfig| -> (Vec<u8>, Vec<u8>, Vec<u8>) {
            cmd_gen_data(cfg).unwrap();
            cmd_pretrain(cfg).unwrap();
            cmd_memorize(cfg).unwrap();
            let stage = cmd_unlearn(cfg, LrChoice::Fixed(1e-3)).unwrap();
            cmd_eval(cfg, Some(&stage.checkpoint), None, "after").unwrap();
            let dirs = cfg.dirs().unwrap();
            (
                std::fs::read(dirs.data.join("forget.jsonl")).unwrap(),
                std::fs::read(
                    dirs.reports.join("trajectory_gradient_ascent_offset.csv"),
                )
                .unwrap(),
                std::fs::read(dirs.reports.join("eval_after.json")).unwrap(),
            )
        };
        let first = run(&cfg);
        let second = run(&cfg);
        assert_eq!(first.0, second.0);
        assert_eq!(first.1, second.1);
        assert_eq!(first.2, second.2);
    }

    #[test]
    fn direct_mode_requires_a_fixed_lr() {
        let dir = TempDir::new().unwrap();
        let mut cfg = tiny_config(dir.path());
        cfg.unlearn.mode = Mode::Direct;
        cmd_gen_data(&cfg).unwrap();
        cmd_pretrain(&cfg).unwrap();
        cmd_memorize(&cfg).unwrap();
        assert!(matches!(
            cmd_unlearn(&cfg, LrChoice::MatchTarget(Some(0.2))),
            Err(Error::Config(_))
        ));
        let stage = cmd_unlearn(&cfg, LrChoice::Fixed(1e-3)).unwrap();
        assert!(stage
            .checkpoint
            .to_string_lossy()
            .ends_with("unlearned_gradient_ascent_direct.ckpt"));
    }

    #[test]
    fn missing_retrain_target_is_reported() {
        let dir = TempDir::new().unwrap();
        let cfg = tiny_config(dir.path());
        cmd_gen_data(&cfg).unwrap();
        cmd_pretrain(&cfg).unwrap();
        cmd_memorize(&cfg).unwrap();
        assert!(matches!(
            cmd_unlearn(&cfg, LrChoice::MatchTarget(None)),
            Err(Error::Config(_))
        ));
    }
}
