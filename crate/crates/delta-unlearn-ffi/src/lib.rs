//! C ABI over the offset-unlearning pipeline.
//!
//! Conventions:
//! - Handles (`DuRunConfig`, `DuEnsemble`) are opaque; create them with the
//!   `_new` / `_open` / `_load` functions and release them with the matching
//!   `_free`. Freeing NULL is a no-op.
//! - Every fallible call returns a [`DuStatus`]; on failure
//!   [`du_last_error_message`] holds a UTF-8 description valid on the same
//!   thread until the next failing call.
//! - Strings returned by the library are heap-allocated and must be released
//!   with [`du_string_free`].

use delta_unlearn::ensemble::OffsetEnsemble;
use delta_unlearn::eval::{answer_probability, generate_answer};
use delta_unlearn::lm::Tokenizer;
use delta_unlearn::pipeline::{
    build_ensemble, cmd_gen_data, cmd_memorize, cmd_pretrain, cmd_repro, cmd_retrain,
    cmd_unlearn, LrChoice, RunConfig,
};
use delta_unlearn::Error;
use libc::c_char;
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DuStatus {
    /// Success.
    DuOk = 0,
    /// Any failure without a dedicated code (I/O, parse, tokenizer, ...).
    DuErrGeneral = 1,
    /// Invalid configuration or config-file parse failure.
    DuErrConfig = 2,
    /// A frozen-model or determinism invariant was violated.
    DuErrInvariant = 3,
    /// Loss or weights became non-finite, or the lr search failed.
    DuErrNumerical = 4,
    /// A required pointer argument was NULL or not valid UTF-8.
    DuErrArgument = 5,
    /// The library panicked; the handle state is unspecified.
    DuErrPanic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let owned = CString::new(message.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn fail(err: Error) -> DuStatus {
    set_error(&err.to_string());
    match err.exit_code() {
        2 => DuStatus::DuErrConfig,
        3 => DuStatus::DuErrInvariant,
        4 => DuStatus::DuErrNumerical,
        _ => DuStatus::DuErrGeneral,
    }
}

fn bad_argument(message: &str) -> DuStatus {
    set_error(message);
    DuStatus::DuErrArgument
}

/// Run a closure with panics converted to `DuErrPanic`.
fn guarded(body: impl FnOnce() -> DuStatus) -> DuStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let text = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("internal panic: {text}"));
            DuStatus::DuErrPanic
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, DuStatus> {
    if ptr.is_null() {
        return Err(bad_argument(&format!("{name} must not be NULL")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| bad_argument(&format!("{name} must be valid UTF-8")))
}

unsafe fn optional_path(ptr: *const c_char, name: &str) -> Result<Option<PathBuf>, DuStatus> {
    if ptr.is_null() {
        Ok(None)
    } else {
        required_str(ptr, name).map(|s| Some(PathBuf::from(s)))
    }
}

/// Opaque run configuration: corpus, model sizes, stage hyperparameters,
/// output directory, and the global seed.
pub struct DuRunConfig {
    inner: RunConfig,
}

/// Opaque scoring handle: the frozen base model combined with an offset
/// pair at a fixed inference-time alpha, plus the run's tokenizer.
pub struct DuEnsemble {
    ensemble: OffsetEnsemble,
    tokenizer: Tokenizer,
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread. Never NULL.
#[no_mangle]
pub extern "C" fn du_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Default configuration writing under `out_dir` with the given seed.
/// Returns NULL only if `out_dir` is NULL or not UTF-8.
///
/// # Safety
/// `out_dir` must be NULL or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn du_run_config_new(out_dir: *const c_char, seed: u64) -> *mut DuRunConfig {
    let Ok(dir) = required_str(out_dir, "out_dir") else {
        return std::ptr::null_mut();
    };
    let mut inner = RunConfig::default();
    inner.out_dir = PathBuf::from(dir);
    inner.seed = seed;
    Box::into_raw(Box::new(DuRunConfig { inner }))
}

/// Load a TOML configuration file; unspecified fields take their defaults.
/// On failure writes NULL to `*out` and reports why.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn du_run_config_load(
    path: *const c_char,
    out: *mut *mut DuRunConfig,
) -> DuStatus {
    if out.is_null() {
        return bad_argument("out must not be NULL");
    }
    *out = std::ptr::null_mut();
    let path = match required_str(path, "path") {
        Ok(p) => PathBuf::from(p),
        Err(status) => return status,
    };
    guarded(|| match RunConfig::load(&path) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(DuRunConfig { inner }));
            DuStatus::DuOk
        }
        Err(e) => fail(e),
    })
}

/// # Safety
/// `cfg` must be NULL or a pointer from `du_run_config_new`/`_load` that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn du_run_config_free(cfg: *mut DuRunConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

unsafe fn config_ref<'a>(cfg: *const DuRunConfig) -> Result<&'a RunConfig, DuStatus> {
    if cfg.is_null() {
        Err(bad_argument("cfg must not be NULL"))
    } else {
        Ok(&(*cfg).inner)
    }
}

/// Generate the synthetic QA corpus and tokenizer under the output
/// directory.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn du_gen_data(cfg: *const DuRunConfig) -> DuStatus {
    let cfg = match config_ref(cfg) {
        Ok(c) => c,
        Err(s) => return s,
    };
    guarded(|| match cmd_gen_data(cfg) {
        Ok(_) => DuStatus::DuOk,
        Err(e) => fail(e),
    })
}

/// Train both model sizes from scratch on the control mix.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn du_pretrain(cfg: *const DuRunConfig) -> DuStatus {
    let cfg = match config_ref(cfg) {
        Ok(c) => c,
        Err(s) => return s,
    };
    guarded(|| match cmd_pretrain(cfg) {
        Ok(()) => DuStatus::DuOk,
        Err(e) => fail(e),
    })
}

/// Fine-tune the pretrained models until they memorize the fictitious
/// set. Writes the post-memorization forget/retain ROUGE if the out
/// pointers are non-NULL.
///
/// # Safety
/// `cfg` must be a live configuration handle; the out pointers must be
/// NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn du_memorize(
    cfg: *const DuRunConfig,
    forget_rouge: *mut f64,
    retain_rouge: *mut f64,
) -> DuStatus {
    let cfg = match config_ref(cfg) {
        Ok(c) => c,
        Err(s) => return s,
    };
    guarded(|| match cmd_memorize(cfg) {
        Ok(report) => {
            if !forget_rouge.is_null() {
                *forget_rouge = report.forget_rouge;
            }
            if !retain_rouge.is_null() {
                *retain_rouge = report.retain_rouge;
            }
            DuStatus::DuOk
        }
        Err(e) => fail(e),
    })
}

/// Retrain the pre-memorization base without the forget set, recording
/// the target the learning-rate search will match.
///
/// # Safety
/// `cfg` must be a live configuration handle; the out pointers must be
/// NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn du_retrain(
    cfg: *const DuRunConfig,
    forget_rouge: *mut f64,
    retain_rouge: *mut f64,
) -> DuStatus {
    let cfg = match config_ref(cfg) {
        Ok(c) => c,
        Err(s) => return s,
    };
    guarded(|| match cmd_retrain(cfg) {
        Ok(report) => {
            if !forget_rouge.is_null() {
                *forget_rouge = report.forget_rouge;
            }
            if !retain_rouge.is_null() {
                *retain_rouge = report.retain_rouge;
            }
            DuStatus::DuOk
        }
        Err(e) => fail(e),
    })
}

/// Run one unlearning arm at a fixed learning rate. Writes the final
/// forget ROUGE if `achieved` is non-NULL.
///
/// # Safety
/// `cfg` must be a live configuration handle; `achieved` must be NULL or
/// valid.
#[no_mangle]
pub unsafe extern "C" fn du_unlearn_fixed_lr(
    cfg: *const DuRunConfig,
    learning_rate: f64,
    achieved: *mut f64,
) -> DuStatus {
    run_unlearn(cfg, LrChoice::Fixed(learning_rate), achieved, std::ptr::null_mut())
}

/// Run one unlearning arm with the learning rate chosen to match the
/// recorded retraining target. Writes the final forget ROUGE and the
/// chosen learning rate to any non-NULL out pointer.
///
/// # Safety
/// `cfg` must be a live configuration handle; the out pointers must be
/// NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn du_unlearn_match_target(
    cfg: *const DuRunConfig,
    achieved: *mut f64,
    chosen_lr: *mut f64,
) -> DuStatus {
    run_unlearn(cfg, LrChoice::MatchTarget(None), achieved, chosen_lr)
}

unsafe fn run_unlearn(
    cfg: *const DuRunConfig,
    choice: LrChoice,
    achieved: *mut f64,
    chosen_lr: *mut f64,
) -> DuStatus {
    let cfg = match config_ref(cfg) {
        Ok(c) => c,
        Err(s) => return s,
    };
    guarded(|| match cmd_unlearn(cfg, choice) {
        Ok(stage) => {
            if !achieved.is_null() {
                *achieved = stage
                    .outcome
                    .trajectory
                    .last()
                    .map(|p| p.forget_rouge)
                    .unwrap_or(f64::NAN);
            }
            if !chosen_lr.is_null() {
                *chosen_lr = stage.chosen_lr;
            }
            DuStatus::DuOk
        }
        Err(e) => fail(e),
    })
}

/// Run the whole pipeline (data through the alpha sweep) in one call.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn du_repro(cfg: *const DuRunConfig) -> DuStatus {
    let cfg = match config_ref(cfg) {
        Ok(c) => c,
        Err(s) => return s,
    };
    guarded(|| match cmd_repro(cfg) {
        Ok(()) => DuStatus::DuOk,
        Err(e) => fail(e),
    })
}

/// Open a scoring handle over the run's checkpoints. `offset_checkpoint`
/// NULL gives the before-unlearning state; otherwise it names a trained
/// offset checkpoint. `alpha` is the inference-time offset strength.
///
/// # Safety
/// `cfg` must be a live configuration handle; `offset_checkpoint` must be
/// NULL or NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn du_ensemble_open(
    cfg: *const DuRunConfig,
    offset_checkpoint: *const c_char,
    alpha: f64,
    out: *mut *mut DuEnsemble,
) -> DuStatus {
    if out.is_null() {
        return bad_argument("out must not be NULL");
    }
    *out = std::ptr::null_mut();
    let cfg = match config_ref(cfg) {
        Ok(c) => c,
        Err(s) => return s,
    };
    let ckpt = match optional_path(offset_checkpoint, "offset_checkpoint") {
        Ok(p) => p,
        Err(s) => return s,
    };
    guarded(|| {
        let opened = (|| {
            let ensemble = build_ensemble(cfg, ckpt.as_deref(), alpha)?;
            let tokenizer = Tokenizer::load(&cfg.dirs()?.tokenizer())?;
            Ok::<_, Error>(DuEnsemble {
                ensemble,
                tokenizer,
            })
        })();
        match opened {
            Ok(handle) => {
                *out = Box::into_raw(Box::new(handle));
                DuStatus::DuOk
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `ens` must be NULL or a pointer from `du_ensemble_open` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn du_ensemble_free(ens: *mut DuEnsemble) {
    if !ens.is_null() {
        drop(Box::from_raw(ens));
    }
}

/// Greedy-decode an answer for `question`. On success writes a string the
/// caller must release with `du_string_free`.
///
/// # Safety
/// `ens` must be a live ensemble handle; `question` NUL-terminated; `out`
/// valid.
#[no_mangle]
pub unsafe extern "C" fn du_ensemble_generate(
    ens: *const DuEnsemble,
    question: *const c_char,
    max_new_tokens: usize,
    out: *mut *mut c_char,
) -> DuStatus {
    if out.is_null() {
        return bad_argument("out must not be NULL");
    }
    *out = std::ptr::null_mut();
    if ens.is_null() {
        return bad_argument("ens must not be NULL");
    }
    let handle = &*ens;
    let question = match required_str(question, "question") {
        Ok(q) => q,
        Err(s) => return s,
    };
    guarded(
        || match generate_answer(&handle.ensemble, &handle.tokenizer, question, max_new_tokens) {
            Ok(answer) => {
                let c = CString::new(answer.replace('\0', " ")).unwrap();
                *out = c.into_raw();
                DuStatus::DuOk
            }
            Err(e) => fail(e),
        },
    )
}

/// Length-normalized probability the ensemble assigns to `answer` given
/// `question` (geometric mean over answer tokens), written to `*prob`.
///
/// # Safety
/// `ens` must be a live ensemble handle; `question` and `answer`
/// NUL-terminated; `prob` valid.
#[no_mangle]
pub unsafe extern "C" fn du_ensemble_answer_probability(
    ens: *const DuEnsemble,
    question: *const c_char,
    answer: *const c_char,
    prob: *mut f64,
) -> DuStatus {
    if prob.is_null() {
        return bad_argument("prob must not be NULL");
    }
    if ens.is_null() {
        return bad_argument("ens must not be NULL");
    }
    let handle = &*ens;
    let question = match required_str(question, "question") {
        Ok(q) => q,
        Err(s) => return s,
    };
    let answer = match required_str(answer, "answer") {
        Ok(a) => a,
        Err(s) => return s,
    };
    guarded(
        || match answer_probability(&handle.ensemble, &handle.tokenizer, question, answer) {
            Ok(ap) => {
                *prob = ap.prob;
                DuStatus::DuOk
            }
            Err(e) => fail(e),
        },
    )
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be NULL or a pointer previously returned through an `out`
/// string parameter, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn du_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
