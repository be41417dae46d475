//! Command-line entry point: one subcommand per pipeline stage.
//! Settings resolve as flags > config file > defaults.

use clap::{Args, Parser, Subcommand, ValueEnum};
use delta_unlearn::pipeline::{
    cmd_eval, cmd_gen_data, cmd_memorize, cmd_pretrain, cmd_repro, cmd_retrain, cmd_sweep,
    cmd_unlearn, LrChoice, RunConfig,
};
use delta_unlearn::unlearn::{Algorithm, Mode};
use delta_unlearn::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "delta-unlearn",
    about = "Offset unlearning for a frozen language model: train a small \
             logit-offset pair to forget, leaving the large model untouched"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every stage.
#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (fixed layout: checkpoints/, data/, reports/, logs/).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Global seed; all stage randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = dir.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    GradientAscent,
    GradientDifference,
    KlMinimization,
    DataRelabeling,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Algorithm {
        match a {
            AlgorithmArg::GradientAscent => Algorithm::GradientAscent,
            AlgorithmArg::GradientDifference => Algorithm::GradientDifference,
            AlgorithmArg::KlMinimization => Algorithm::KlMinimization,
            AlgorithmArg::DataRelabeling => Algorithm::DataRelabeling,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Offset,
    Direct,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Offset => Mode::Offset,
            ModeArg::Direct => Mode::Direct,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic QA corpus and tokenizer.
    GenData {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_authors: Option<usize>,
        #[arg(long)]
        qa_per_author: Option<usize>,
        #[arg(long)]
        forget_fraction: Option<f64>,
        #[arg(long)]
        k_perturbed: Option<usize>,
    },
    /// Train both model sizes from scratch on the control mix.
    Pretrain {
        #[command(flatten)]
        common: Common,
    },
    /// Fine-tune the pretrained models on the full fictitious set.
    Memorize {
        #[command(flatten)]
        common: Common,
    },
    /// Fine-tune the pre-memorize base with the forget set excluded;
    /// writes the matching target.
    Retrain {
        #[command(flatten)]
        common: Common,
    },
    /// Run one unlearning arm; pick the lr directly or match the
    /// retraining target.
    Unlearn {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        algorithm: Option<AlgorithmArg>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Fixed learning rate (mutually exclusive with --match-target).
        #[arg(long, conflicts_with = "match_target")]
        lr: Option<f64>,
        /// Match the retraining baseline's forget ROUGE; give a value to
        /// override the recorded target.
        #[arg(long, num_args = 0..=1, default_missing_value = "-1")]
        match_target: Option<f64>,
        /// Training-time offset strength α.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Metric report for an ensemble state.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Trained offset checkpoint; omitted = before-unlearning state.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Inference-time offset strength α.
        #[arg(long)]
        alpha: Option<f64>,
        /// Label for the report files (eval_<label>.{json,csv}).
        #[arg(long, default_value = "report")]
        label: String,
    },
    /// Per-subset ROUGE across an inference-time α grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated strictly increasing α values.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Full pipeline with one command: data through sweep.
    Repro {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            common,
            n_authors,
            qa_per_author,
            forget_fraction,
            k_perturbed,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(v) = n_authors {
                cfg.corpus.n_authors = v;
            }
            if let Some(v) = qa_per_author {
                cfg.corpus.qa_per_author = v;
            }
            if let Some(v) = forget_fraction {
                cfg.corpus.forget_fraction = v;
            }
            if let Some(v) = k_perturbed {
                cfg.corpus.k_perturbed = v;
            }
            let splits = cmd_gen_data(&cfg)?;
            println!(
                "wrote {} forget / {} retain / {} control examples to {}",
                splits.forget.len(),
                splits.retain.len(),
                splits.control().count(),
                cfg.out_dir.join("data").display()
            );
            Ok(())
        }
        Command::Pretrain { common } => {
            let cfg = common.resolve()?;
            cmd_pretrain(&cfg)?;
            println!("wrote pretrained checkpoints (large + small)");
            Ok(())
        }
        Command::Memorize { common } => {
            let cfg = common.resolve()?;
            let report = cmd_memorize(&cfg)?;
            println!(
                "memorized: forget ROUGE {:.3}, retain ROUGE {:.3}",
                report.forget_rouge, report.retain_rouge
            );
            Ok(())
        }
        Command::Retrain { common } => {
            let cfg = common.resolve()?;
            let report = cmd_retrain(&cfg)?;
            println!(
                "retraining target: forget ROUGE {:.3} (retain {:.3})",
                report.forget_rouge, report.retain_rouge
            );
            Ok(())
        }
        Command::Unlearn {
            common,
            algorithm,
            mode,
            lr,
            match_target,
            alpha,
            epochs,
        } => {
            let mut cfg = common.resolve()?;
            if let Some(a) = algorithm {
                cfg.unlearn.algorithm = a.into();
            }
            if let Some(m) = mode {
                cfg.unlearn.mode = m.into();
            }
            if let Some(a) = alpha {
                cfg.unlearn.alpha_train = a;
            }
            if let Some(e) = epochs {
                cfg.unlearn.epochs = e;
            }
            let choice = match (lr, match_target) {
                (Some(rate), None) => LrChoice::Fixed(rate),
                (None, Some(t)) if t < 0.0 => LrChoice::MatchTarget(None),
                (None, Some(t)) => LrChoice::MatchTarget(Some(t)),
                (None, None) => LrChoice::Fixed(cfg.unlearn.learning_rate),
                (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
            };
            let stage = cmd_unlearn(&cfg, choice)?;
            let last = stage.outcome.trajectory.last().unwrap();
            println!(
                "unlearned with lr {:.3e}: forget ROUGE {:.3}, retain ROUGE {:.3} ({})",
                stage.chosen_lr,
                last.forget_rouge,
                last.retain_rouge,
                stage.checkpoint.display()
            );
            for w in &stage.outcome.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Eval {
            common,
            checkpoint,
            alpha,
            label,
        } => {
            let cfg = common.resolve()?;
            let report = cmd_eval(&cfg, checkpoint.as_deref(), alpha, &label)?;
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::Sweep {
            common,
            checkpoint,
            alphas,
        } => {
            let cfg = common.resolve()?;
            let rows = cmd_sweep(&cfg, &checkpoint, alphas.as_deref())?;
            print!("{}", delta_unlearn::eval::sweep_to_csv(&rows));
            Ok(())
        }
        Command::Repro { common } => {
            let cfg = common.resolve()?;
            cmd_repro(&cfg)?;
            println!("full pipeline reproduced under {}", cfg.out_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("DELTA_UNLEARN_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}