//! C interface to `mfmc`.
//!
//! Objects are opaque heap handles made by a `*_new` function and released by
//! the matching `*_free`; freeing NULL is a no-op. Fallible calls return an
//! [`MfmcStatus`] and write results through out-pointers, which are left
//! untouched on failure. The message of the most recent failure on the calling
//! thread is returned by [`mfmc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mfmc::experiments::{run_experiment, RunOptions, RunSummary};
use mfmc::io::config::ExperimentConfig;
use mfmc::models::toy::ToyModel;
use mfmc::{estimate, Error, EstimatorScheme, TargetSequence, TruncationDistribution};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Config = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MfmcScheme {
    RussianRoulette = 0,
    SingleTerm = 1,
}

impl From<MfmcScheme> for EstimatorScheme {
    fn from(s: MfmcScheme) -> Self {
        match s {
            MfmcScheme::RussianRoulette => EstimatorScheme::RussianRoulette,
            MfmcScheme::SingleTerm => EstimatorScheme::SingleTerm,
        }
    }
}

/// Geometric truncation distribution over fidelities `1..=k_max`.
pub struct MfmcTruncation(TruncationDistribution);

/// ChaCha8 generator on a chosen stream.
pub struct MfmcRng(ChaCha8Rng);

/// Conjugate Gaussian toy sequence over a fixed dataset.
pub struct MfmcToy(ToyModel);

/// Result of an experiment run.
pub struct MfmcSummary {
    summary: RunSummary,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (MfmcStatus, String);

fn status_of(e: &Error) -> MfmcStatus {
    match e {
        Error::InvalidArgument(_)
        | Error::FidelityOutOfRange { .. }
        | Error::FidelityCapExceeded { .. }
        | Error::DimensionMismatch { .. } => MfmcStatus::InvalidArgument,
        Error::Config(_) | Error::Parse { .. } => MfmcStatus::Config,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => MfmcStatus::Io,
        Error::Chain { source, .. } => status_of(source),
        _ => MfmcStatus::Numerical,
    }
}

fn from_error(e: Error) -> Failure {
    (status_of(&e), e.to_string())
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard<F>(body: F) -> MfmcStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => MfmcStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("panic inside mfmc");
            MfmcStatus::Internal
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| (MfmcStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| (MfmcStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err((MfmcStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, Failure> {
    if p.is_null() {
        return Err((MfmcStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (MfmcStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err((MfmcStatus::NullPointer, format!("{what} is NULL")));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mfmc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mfmc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

// ------------------------------------------------------------- truncation

/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mfmc_truncation_new(gamma0: f64, k_max: usize, out: *mut *mut MfmcTruncation) -> MfmcStatus {
    guard(|| {
        let dist = TruncationDistribution::geometric_with_cap(gamma0, k_max).map_err(from_error)?;
        write(out, Box::into_raw(Box::new(MfmcTruncation(dist))), "out")
    })
}

/// # Safety
/// `h` must be NULL or a handle from [`mfmc_truncation_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfmc_truncation_free(h: *mut MfmcTruncation) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// `P(K = k)`.
///
/// # Safety
/// `h` must be a live truncation handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_truncation_pmf(h: *const MfmcTruncation, k: usize, out: *mut f64) -> MfmcStatus {
    guard(|| {
        let d = handle(h, "truncation")?;
        write(out, d.0.pmf(k).map_err(from_error)?, "out")
    })
}

/// `P(K >= k)`.
///
/// # Safety
/// `h` must be a live truncation handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_truncation_survival(h: *const MfmcTruncation, k: usize, out: *mut f64) -> MfmcStatus {
    guard(|| {
        let d = handle(h, "truncation")?;
        write(out, d.0.survival(k).map_err(from_error)?, "out")
    })
}

/// Weight of increment `k` in an estimate truncated at `truncation`.
///
/// # Safety
/// `h` must be a live truncation handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_truncation_weight(
    h: *const MfmcTruncation,
    scheme: MfmcScheme,
    k: usize,
    truncation: usize,
    out: *mut f64,
) -> MfmcStatus {
    guard(|| {
        let d = handle(h, "truncation")?;
        let w = EstimatorScheme::from(scheme).weight(k, truncation, &d.0).map_err(from_error)?;
        write(out, w, "out")
    })
}

/// Draws a truncation level.
///
/// # Safety
/// `h` and `rng` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_truncation_sample(
    h: *const MfmcTruncation,
    rng: *mut MfmcRng,
    out: *mut usize,
) -> MfmcStatus {
    guard(|| {
        let d = handle(h, "truncation")?;
        let r = handle_mut(rng, "rng")?;
        write(out, d.0.sample(&mut r.0).map_err(from_error)?, "out")
    })
}

// ------------------------------------------------------------------- rng

/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn mfmc_rng_new(seed: u64, stream: u64, out: *mut *mut MfmcRng) -> MfmcStatus {
    guard(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        write(out, Box::into_raw(Box::new(MfmcRng(rng))), "out")
    })
}

/// # Safety
/// `h` must be NULL or a handle from [`mfmc_rng_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfmc_rng_free(h: *mut MfmcRng) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

// ------------------------------------------------------------------- toy

/// Copies `len` observations into a new toy sequence.
///
/// # Safety
/// `data` must point to `len` readable doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_toy_new(data: *const f64, len: usize, out: *mut *mut MfmcToy) -> MfmcStatus {
    guard(|| {
        let data = slice(data, len, "data")?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err((MfmcStatus::InvalidArgument, "data must be finite".into()));
        }
        write(out, Box::into_raw(Box::new(MfmcToy(ToyModel::new(data.to_vec())))), "out")
    })
}

/// # Safety
/// `h` must be NULL or a handle from [`mfmc_toy_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfmc_toy_free(h: *mut MfmcToy) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Log-likelihood at fidelity `k` (prior excluded).
///
/// # Safety
/// `h` must be a live toy handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_toy_log_level(h: *const MfmcToy, theta: f64, k: usize, out: *mut f64) -> MfmcStatus {
    guard(|| {
        let toy = handle(h, "toy")?;
        if k == 0 {
            return Err((MfmcStatus::InvalidArgument, "fidelity starts at 1".into()));
        }
        write(out, toy.0.log_level(&[theta], k).map_err(from_error)?, "out")
    })
}

/// Log-likelihood of the limiting model.
///
/// # Safety
/// `h` must be a live toy handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_toy_log_limit(h: *const MfmcToy, theta: f64, out: *mut f64) -> MfmcStatus {
    guard(|| {
        let toy = handle(h, "toy")?;
        write(out, toy.0.log_limit(&[theta]), "out")
    })
}

/// Unbiased estimate of the limiting likelihood truncated at `truncation`, as
/// `sign * exp(log_abs)`, with the cost of the levels it evaluated.
///
/// # Safety
/// `toy` and `dist` must be live handles; the three out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_toy_estimate(
    toy: *const MfmcToy,
    dist: *const MfmcTruncation,
    theta: f64,
    truncation: usize,
    scheme: MfmcScheme,
    out_log_abs: *mut f64,
    out_sign: *mut i8,
    out_cost: *mut f64,
) -> MfmcStatus {
    guard(|| {
        let toy = handle(toy, "toy")?;
        let d = handle(dist, "truncation")?;
        if out_log_abs.is_null() || out_sign.is_null() || out_cost.is_null() {
            return Err((MfmcStatus::NullPointer, "an output pointer is NULL".into()));
        }
        let rec = estimate(&toy.0, &[theta], truncation, scheme.into(), &d.0).map_err(from_error)?;
        write(out_log_abs, rec.value.log_abs(), "out_log_abs")?;
        write(out_sign, rec.value.sign().as_i8(), "out_sign")?;
        write(out_cost, rec.cost, "out_cost")
    })
}

// ------------------------------------------------------------- experiments

/// Runs the experiment described by the TOML file at `config_path`, writing
/// samples and `summary.json` under `out_dir`. `has_seed` selects whether
/// `seed` overrides the file. `threads == 0` leaves parallelism uncapped.
///
/// # Safety
/// Both paths must be NUL-terminated strings and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_run_config(
    config_path: *const c_char,
    out_dir: *const c_char,
    has_seed: bool,
    seed: u64,
    threads: usize,
    out: *mut *mut MfmcSummary,
) -> MfmcStatus {
    guard(|| {
        let path = string(config_path, "config_path")?;
        let dir = string(out_dir, "out_dir")?;
        if out.is_null() {
            return Err((MfmcStatus::NullPointer, "out is NULL".into()));
        }
        let mut cfg = ExperimentConfig::load(Path::new(&path)).map_err(from_error)?;
        if has_seed {
            cfg.seed = Some(seed);
        }
        let opts = RunOptions {
            out_dir: PathBuf::from(dir),
            threads: (threads > 0).then_some(threads),
        };
        let summary = run_experiment(&cfg, &opts).map_err(from_error)?;
        let json = serde_json::to_string(&summary).map_err(|e| (MfmcStatus::Io, e.to_string()))?;
        let json = CString::new(json).map_err(|e| (MfmcStatus::Internal, e.to_string()))?;
        write(out, Box::into_raw(Box::new(MfmcSummary { summary, json })), "out")
    })
}

/// # Safety
/// `h` must be NULL or a handle from [`mfmc_run_config`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mfmc_summary_free(h: *mut MfmcSummary) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// The summary as JSON; owned by the handle.
///
/// # Safety
/// `h` must be a live summary handle.
#[no_mangle]
pub unsafe extern "C" fn mfmc_summary_json(h: *const MfmcSummary) -> *const c_char {
    h.as_ref().map_or(std::ptr::null(), |s| s.json.as_ptr())
}

/// Number of reported coordinates.
///
/// # Safety
/// `h` must be a live summary handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_summary_dim(h: *const MfmcSummary, out: *mut usize) -> MfmcStatus {
    guard(|| write(out, handle(h, "summary")?.summary.pooled.mean.len(), "out"))
}

/// Pooled sign-corrected posterior mean of coordinate `i`.
///
/// # Safety
/// `h` must be a live summary handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mfmc_summary_pooled_mean(h: *const MfmcSummary, i: usize, out: *mut f64) -> MfmcStatus {
    guard(|| {
        let s = handle(h, "summary")?;
        let m = s.summary.pooled.mean.get(i).copied().ok_or_else(|| {
            (MfmcStatus::InvalidArgument, format!("coordinate {i} out of range"))
        })?;
        let m = m.ok_or_else(|| (MfmcStatus::Numerical, "sign sum is zero".to_string()))?;
        write(out, m, "out")
    })
}

/// Pooled total ledger cost, mean fidelity and negative-sign fraction.
///
/// # Safety
/// `h` must be a live summary handle; each out-pointer may be NULL to skip it.
#[no_mangle]
pub unsafe extern "C" fn mfmc_summary_totals(
    h: *const MfmcSummary,
    total_cost: *mut f64,
    mean_k: *mut f64,
    negative_sign_fraction: *mut f64,
) -> MfmcStatus {
    guard(|| {
        let p = &handle(h, "summary")?.summary.pooled;
        for (out, v) in [
            (total_cost, p.total_cost),
            (mean_k, p.mean_k),
            (negative_sign_fraction, p.negative_sign_fraction),
        ] {
            if !out.is_null() {
                out.write(v);
            }
        }
        Ok(())
    })
}
