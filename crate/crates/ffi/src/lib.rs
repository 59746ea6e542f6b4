//! C ABI over `mdim-core`.
//!
//! Objects are opaque handles created by `*_new`/`*_load` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`MdimStatus`]; on failure [`mdim_last_error`] describes what went wrong
//! on the calling thread. Strings returned by the library must be released
//! with [`mdim_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mdim_core::domain::Domain;
use mdim_core::harness::dialogue::dialogue_rng;
use mdim_core::harness::training::dialogue_settings;
use mdim_core::harness::{run_dialogue, run_evaluation, run_training, EvalExploration, EvalStats, ExperimentConfig, ScriptedPolicy};
use mdim_core::selection::AgentEnsemble;
use mdim_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Incompatible = 5,
    Config = 6,
    Internal = 7,
    Panic = 8,
}

/// Ontology, venue database and feature layouts.
pub struct MdimDomain(Domain);

/// A frozen policy ensemble.
pub struct MdimEnsemble(AgentEnsemble);

/// Aggregate statistics over simulated dialogues.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MdimEvalStats {
    pub n_dialogues: u64,
    /// Percentage of successful dialogues.
    pub success_rate: f64,
    pub average_length: f64,
    pub average_reward: f64,
}

impl From<EvalStats> for MdimEvalStats {
    fn from(s: EvalStats) -> Self {
        Self {
            n_dialogues: s.n_dialogues as u64,
            success_rate: s.success_rate,
            average_length: s.average_length,
            average_reward: s.average_reward,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MdimStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) | Error::File { .. } => MdimStatus::Io,
            Error::Incompatible(_) | Error::FeatureLength { .. } => MdimStatus::Incompatible,
            Error::Config(_) | Error::TomlDe(_) | Error::Ontology(_) | Error::EmptySlot(_) => MdimStatus::Config,
            Error::Contract(_) | Error::EmptyDatabase | Error::UnknownSlot(_) => MdimStatus::InvalidArgument,
            _ => MdimStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: &str) -> Failure {
    Failure(MdimStatus::InvalidArgument, msg.to_string())
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MdimStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdimStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MdimStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(MdimStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MdimStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(MdimStatus::NullPointer, format!("{name} is null")))
}

fn out_arg<T>(p: *mut T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(MdimStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

fn check_rate(v: f64, name: &str) -> Result<(), Failure> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(&format!("{name} must lie in [0, 1]")))
    }
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn mdim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The caller owns
/// the returned string.
#[no_mangle]
pub extern "C" fn mdim_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().map_or(ptr::null_mut(), CString::into_raw))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mdim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Restaurant domain with a generated database of `n_venues` venues.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mdim_domain_restaurant(n_venues: usize, seed: u64, out: *mut *mut MdimDomain) -> MdimStatus {
    guard(|| {
        out_arg(out, "out")?;
        let domain = Domain::restaurant(n_venues, seed)?;
        *out = Box::into_raw(Box::new(MdimDomain(domain)));
        Ok(())
    })
}

/// Length of the shared policy feature vector.
///
/// # Safety
/// `domain` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdim_domain_feature_count(domain: *const MdimDomain) -> usize {
    domain.as_ref().map_or(0, |d| d.0.features.len())
}

/// # Safety
/// `domain` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdim_domain_free(domain: *mut MdimDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Loads an ensemble directory written by training.
///
/// # Safety
/// Pointers must be valid; `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mdim_ensemble_load(
    domain: *const MdimDomain,
    dir: *const c_char,
    out: *mut *mut MdimEnsemble,
) -> MdimStatus {
    guard(|| {
        let domain = ref_arg(domain, "domain")?;
        let dir = str_arg(dir, "dir")?;
        out_arg(out, "out")?;
        let ensemble = AgentEnsemble::load(dir, &domain.0)?;
        *out = Box::into_raw(Box::new(MdimEnsemble(ensemble)));
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid; `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mdim_ensemble_save(ensemble: *const MdimEnsemble, dir: *const c_char) -> MdimStatus {
    guard(|| {
        let ensemble = ref_arg(ensemble, "ensemble")?;
        let dir = str_arg(dir, "dir")?;
        ensemble.0.save(dir)?;
        Ok(())
    })
}

/// Variant label (`one_dim`, `multi_dim`, `mdim_ada`, `mdim_src`); the caller
/// owns the string. NULL for a NULL handle.
///
/// # Safety
/// `ensemble` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdim_ensemble_variant(ensemble: *const MdimEnsemble) -> *mut c_char {
    ensemble.as_ref().map_or(ptr::null_mut(), |e| {
        CString::new(e.0.variant.label()).expect("labels have no NUL").into_raw()
    })
}

/// # Safety
/// `ensemble` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mdim_ensemble_free(ensemble: *mut MdimEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Trains according to a TOML experiment config (NULL or empty for defaults).
/// Artifacts go to `out_dir` when non-NULL. When `out_final` is non-NULL it
/// receives the final ensemble of run 0.
///
/// # Safety
/// Pointers must be NULL or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mdim_train(
    domain: *const MdimDomain,
    config_toml: *const c_char,
    out_dir: *const c_char,
    out_final: *mut *mut MdimEnsemble,
) -> MdimStatus {
    guard(|| {
        let domain = ref_arg(domain, "domain")?;
        let mut config = match config_toml.is_null() {
            true => ExperimentConfig::default(),
            false => ExperimentConfig::from_toml(str_arg(config_toml, "config_toml")?)?,
        };
        if !out_dir.is_null() {
            config.out_dir = Some(PathBuf::from(str_arg(out_dir, "out_dir")?));
        }
        let artifacts = run_training(&config, &domain.0)?;
        if !out_final.is_null() {
            let run = artifacts.runs.into_iter().next().ok_or_else(|| invalid("no runs trained"))?;
            *out_final = Box::into_raw(Box::new(MdimEnsemble(run.final_ensemble)));
        }
        Ok(())
    })
}

/// Evaluates `ensemble` on `n_dialogues` simulated dialogues. A positive
/// `temperature` samples actions; zero or negative selects greedily.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdim_evaluate(
    domain: *const MdimDomain,
    ensemble: *const MdimEnsemble,
    n_dialogues: usize,
    error_rate: f64,
    problem_rate: f64,
    temperature: f64,
    seed: u64,
    out: *mut MdimEvalStats,
) -> MdimStatus {
    guard(|| {
        let domain = ref_arg(domain, "domain")?;
        let ensemble = ref_arg(ensemble, "ensemble")?;
        out_arg(out, "out")?;
        check_rate(error_rate, "error_rate")?;
        check_rate(problem_rate, "problem_rate")?;
        let config = ExperimentConfig {
            problem_rate,
            ..Default::default()
        };
        let settings = dialogue_settings(&config, &domain.0, error_rate)?;
        let exploration = if temperature > 0.0 { EvalExploration::At(temperature) } else { EvalExploration::Off };
        let pool = vec![(String::new(), ensemble.0.clone())];
        let (report, _) = run_evaluation(&pool, &domain.0, &settings, n_dialogues, seed, exploration, false)?;
        *out = report.overall.into();
        Ok(())
    })
}

/// Runs the hand-written reference policy against the simulator.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mdim_simulate_scripted(
    domain: *const MdimDomain,
    n_dialogues: usize,
    error_rate: f64,
    problem_rate: f64,
    seed: u64,
    out: *mut MdimEvalStats,
) -> MdimStatus {
    guard(|| {
        let domain = ref_arg(domain, "domain")?;
        out_arg(out, "out")?;
        check_rate(error_rate, "error_rate")?;
        check_rate(problem_rate, "problem_rate")?;
        let config = ExperimentConfig {
            problem_rate,
            ..Default::default()
        };
        let settings = dialogue_settings(&config, &domain.0, error_rate)?;
        let logs = (0..n_dialogues as u64)
            .map(|i| {
                let mut rng = dialogue_rng(seed, 0, 2, i);
                run_dialogue(&ScriptedPolicy, &domain.0, &settings, &mut rng, false, false).map(|(log, _)| log)
            })
            .collect::<Result<Vec<_>, _>>()?;
        *out = EvalStats::from_logs(&logs).into();
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_and_last_error() {
        let status = unsafe { mdim_domain_restaurant(0, 1, ptr::null_mut()) };
        assert_eq!(status, MdimStatus::NullPointer);
        let msg = mdim_last_error();
        assert!(!msg.is_null());
        let text = unsafe { CStr::from_ptr(msg) }.to_str().unwrap().to_string();
        unsafe { mdim_string_free(msg) };
        assert!(text.contains("out"));
    }

    #[test]
    fn success_clears_error() {
        let mut d = ptr::null_mut();
        assert_eq!(unsafe { mdim_domain_restaurant(0, 1, &mut d) }, MdimStatus::InvalidArgument);
        assert_eq!(unsafe { mdim_domain_restaurant(20, 1, &mut d) }, MdimStatus::Ok);
        assert!(mdim_last_error().is_null());
        assert_eq!(unsafe { mdim_domain_feature_count(d) }, 48);
        unsafe { mdim_domain_free(d) };
    }
}
