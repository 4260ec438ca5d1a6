//! C interface to the isodrum library.
//!
//! Objects are opaque handles created and destroyed through this interface.
//! Every function returns an [`IsodrumStatus`]; on failure a message is kept
//! per thread and can be read with [`isodrum_last_error_message`]. Panics are
//! caught at the boundary and reported as [`IsodrumStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use isodrum::cli::{compare, prepare, CliError};
use isodrum::config::ExperimentConfig;
use isodrum::eigen::{lowest_eigenpairs_with, EigenOptions, Spectrum};
use isodrum::extrapolate::{richardson, ConvergenceSequence};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IsodrumStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Parsed experiment configuration.
pub struct IsodrumConfig(ExperimentConfig);

/// Eigenvalues and residual norms of one solve.
pub struct IsodrumSpectrum(Spectrum);

/// Summary of the isospectrality check on the pair.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IsodrumCompareSummary {
    pub intertwining_residual: f64,
    pub exact: bool,
    pub max_rel_diff: f64,
    pub max_abs_diff: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(s).unwrap()));
}

struct Failure(IsodrumStatus, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match e {
            CliError::Config(_) => IsodrumStatus::Config,
            CliError::Numerical(_) => IsodrumStatus::Numerical,
            CliError::Io(_) => IsodrumStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IsodrumStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IsodrumStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            IsodrumStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(IsodrumStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(IsodrumStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, written: *mut usize) -> Result<(), Failure> {
    if !written.is_null() {
        *written = src.len();
    }
    if cap < src.len() {
        return Err(Failure(
            IsodrumStatus::BufferTooSmall,
            format!("buffer holds {cap} values, {} needed", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn isodrum_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isodrum_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a config in key = value or JSON form.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isodrum_config_parse(
    text: *const c_char,
    out: *mut *mut IsodrumConfig,
) -> IsodrumStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = str_arg(text, "text")?;
        let cfg = ExperimentConfig::parse(text)
            .map_err(|e| Failure(IsodrumStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(IsodrumConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from [`isodrum_config_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn isodrum_config_free(cfg: *mut IsodrumConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of domains (1, or 2 for the pair) and grids in the config.
///
/// # Safety
/// `cfg` must be a live handle; the out pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn isodrum_config_counts(
    cfg: *const IsodrumConfig,
    domains: *mut usize,
    grids: *mut usize,
) -> IsodrumStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if !domains.is_null() {
            *domains = cfg.0.domain.domains().len();
        }
        if !grids.is_null() {
            *grids = cfg.0.cells.len();
        }
        Ok(())
    })
}

/// Lowest `solver.k` eigenvalues of domain `domain` on grid `grid`
/// (indices into the config's lists).
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isodrum_solve(
    cfg: *const IsodrumConfig,
    domain: usize,
    grid: usize,
    out: *mut *mut IsodrumSpectrum,
) -> IsodrumStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let cfg = &cfg.as_ref().ok_or_else(|| null("cfg"))?.0;
        let names = cfg.domain.domains();
        let (Some(&name), Some(&cells)) = (names.get(domain), cfg.cells.get(grid)) else {
            return Err(Failure(
                IsodrumStatus::OutOfRange,
                format!("domain {domain} or grid {grid} out of range"),
            ));
        };
        let p = prepare(cfg, name, cells)?;
        let mut opts = EigenOptions::new(cfg.solver.k);
        opts.tol = cfg.solver.tol;
        opts.seed = cfg.solver.seed;
        opts.mode = cfg.solver.mode;
        opts.keep_vectors = false;
        let s = lowest_eigenpairs_with(&p.operator, &opts).map_err(CliError::from)?;
        *out = Box::into_raw(Box::new(IsodrumSpectrum(s)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from [`isodrum_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn isodrum_spectrum_free(s: *mut IsodrumSpectrum) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of eigenvalues held by `s`, or 0 for a null handle.
///
/// # Safety
/// `s` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn isodrum_spectrum_len(s: *const IsodrumSpectrum) -> usize {
    s.as_ref().map_or(0, |s| s.0.len())
}

/// Copies the eigenvalues, ascending, into `buf` of capacity `cap`.
/// `written` receives the required count even when `cap` is too small.
///
/// # Safety
/// `buf` must hold `cap` doubles; `written` may be null.
#[no_mangle]
pub unsafe extern "C" fn isodrum_spectrum_eigenvalues(
    s: *const IsodrumSpectrum,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> IsodrumStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectrum"))?;
        copy_out(&s.0.eigenvalues, buf, cap, written)
    })
}

/// Copies the residual norms `‖Av - λv‖`, as [`isodrum_spectrum_eigenvalues`].
///
/// # Safety
/// As [`isodrum_spectrum_eigenvalues`].
#[no_mangle]
pub unsafe extern "C" fn isodrum_spectrum_residuals(
    s: *const IsodrumSpectrum,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> IsodrumStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("spectrum"))?;
        copy_out(&s.0.residuals, buf, cap, written)
    })
}

/// Transplantation check and spectrum comparison; needs `domain = pair`.
/// Values are the worst over the config's grids.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn isodrum_compare(
    cfg: *const IsodrumConfig,
    out: *mut IsodrumCompareSummary,
) -> IsodrumStatus {
    guard(|| {
        let cfg = &cfg.as_ref().ok_or_else(|| null("cfg"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = compare(cfg, None)?;
        *out = IsodrumCompareSummary {
            intertwining_residual: r.intertwining_residual,
            exact: r.exact,
            max_rel_diff: r.max_rel_diff,
            max_abs_diff: r.grids.iter().map(|g| g.max_abs_diff).fold(0.0, f64::max),
        };
        Ok(())
    })
}

/// Richardson extrapolation of `n` values `v` at spacings `h` in powers of
/// `h^order`.
///
/// # Safety
/// `h` and `v` must hold `n` doubles; `limit` and `stability` must be valid
/// pointers (`stability` may be null).
#[no_mangle]
pub unsafe extern "C" fn isodrum_richardson(
    h: *const f64,
    v: *const f64,
    n: usize,
    order: f64,
    limit: *mut f64,
    stability: *mut f64,
) -> IsodrumStatus {
    guard(|| {
        if h.is_null() || v.is_null() {
            return Err(null("input"));
        }
        let limit = limit.as_mut().ok_or_else(|| null("limit"))?;
        let hs = std::slice::from_raw_parts(h, n);
        let vs = std::slice::from_raw_parts(v, n);
        let seq = ConvergenceSequence::new("ffi", hs.iter().copied().zip(vs.iter().copied()).collect())
            .map_err(|e| Failure(IsodrumStatus::Config, e.to_string()))?;
        let r = richardson(&seq, order).map_err(|e| Failure(IsodrumStatus::Config, e.to_string()))?;
        *limit = r.limit;
        if let Some(s) = stability.as_mut() {
            *s = r.stability;
        }
        Ok(())
    })
}
