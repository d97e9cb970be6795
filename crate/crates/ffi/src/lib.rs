//! C ABI over `ep-cde`.
//!
//! Every function returns an [`EpCdeStatus`]; on failure the message is kept
//! per thread and can be copied out with [`ep_cde_last_error_message`].
//! Fits are opaque handles released with [`ep_cde_fit_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ep_cde::risk::{pinsker_aniso, pinsker_uni, risk_report, SmoothnessClass};
use ep_cde::{fit, CondDensityFit, DesignKind, Error, Loss, SamplePairs};

/// Outcome of a call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpCdeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpCdeLoss {
    Square = 0,
    Line = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpCdeDesign {
    Fixed = 0,
    Random = 1,
}

/// A fitted conditional density estimate.
pub struct EpCdeFit {
    inner: CondDensityFit,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EpCdeStatus {
    match e {
        Error::SampleTooSmall { .. } | Error::DegenerateBlock { .. } | Error::Degenerate(_) => EpCdeStatus::Precondition,
        Error::RootFinding(_) | Error::Quadrature(_) => EpCdeStatus::Numerical,
        _ => EpCdeStatus::InvalidArgument,
    }
}

struct Fail(EpCdeStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(EpCdeStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `body`, converting errors and panics into a status.
fn guard(body: impl FnOnce() -> Result<(), Fail>) -> EpCdeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EpCdeStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            EpCdeStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for reads of `len` values.
unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// # Safety
/// `p` must be null or valid for a write.
unsafe fn put<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

/// # Safety
/// `p` must be null or point to a live handle.
unsafe fn handle<'a>(p: *const EpCdeFit) -> Result<&'a EpCdeFit, Fail> {
    p.as_ref().ok_or_else(|| null("fit"))
}

/// Fits the estimator to `n` pairs and stores a new handle in `*out`.
/// `design` takes an [`EpCdeDesign`] value and `loss` an [`EpCdeLoss`] value.
///
/// # Safety
/// `y` and `x` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_fit_new(
    y: *const f64,
    x: *const f64,
    n: usize,
    design: i32,
    loss: i32,
    out: *mut *mut EpCdeFit,
) -> EpCdeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let design = match design {
            d if d == EpCdeDesign::Fixed as i32 => DesignKind::Fixed,
            d if d == EpCdeDesign::Random as i32 => DesignKind::Random,
            d => return Err(Fail(EpCdeStatus::InvalidArgument, format!("unknown design code {d}"))),
        };
        let loss = match loss {
            l if l == EpCdeLoss::Square as i32 => Loss::Square,
            l if l == EpCdeLoss::Line as i32 => Loss::Line,
            l => return Err(Fail(EpCdeStatus::InvalidArgument, format!("unknown loss code {l}"))),
        };
        let data = SamplePairs::new(slice(y, n, "y")?.to_vec(), slice(x, n, "x")?.to_vec(), design)?;
        let inner = fit(&data, loss, None, None)?;
        out.write(Box::into_raw(Box::new(EpCdeFit { inner })));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `fit` must be null or a handle from [`ep_cde_fit_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_fit_free(fit: *mut EpCdeFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Evaluates the estimate at one point.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_fit_evaluate(fit: *const EpCdeFit, y: f64, x: f64, out: *mut f64) -> EpCdeStatus {
    guard(|| {
        let v = handle(fit)?.inner.evaluate(y, x)?;
        put(out, v, "out")
    })
}

/// Evaluates on the tensor grid `ys x xs`, writing `ny * nx` values
/// response-major (`out[i * nx + j]` is at `(ys[i], xs[j])`).
///
/// # Safety
/// `ys`, `xs` must hold `ny`, `nx` values and `out` room for `ny * nx`.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_fit_evaluate_grid(
    fit: *const EpCdeFit,
    ys: *const f64,
    ny: usize,
    xs: *const f64,
    nx: usize,
    out: *mut f64,
) -> EpCdeStatus {
    guard(|| {
        let f = handle(fit)?;
        let (ys, xs) = (slice(ys, ny, "ys")?, slice(xs, nx, "xs")?);
        let total = ny
            .checked_mul(nx)
            .ok_or_else(|| Fail(EpCdeStatus::InvalidArgument, "grid size overflows".into()))?;
        if total == 0 {
            return Ok(());
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let grid = f.inner.evaluate_grid(ys, xs)?;
        std::slice::from_raw_parts_mut(out, total).copy_from_slice(&grid.values);
        Ok(())
    })
}

/// The plug-in coefficient of difficulty used by the fit.
///
/// # Safety
/// `fit` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_fit_difficulty(fit: *const EpCdeFit, out: *mut f64) -> EpCdeStatus {
    guard(|| put(out, handle(fit)?.inner.difficulty(), "out"))
}

/// Univariate and bivariate block cutoffs `K` and `T`.
///
/// # Safety
/// `fit` must be a live handle; `k` and `t` writable.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_fit_cutoffs(fit: *const EpCdeFit, k: *mut usize, t: *mut usize) -> EpCdeStatus {
    guard(|| {
        let s = handle(fit)?.inner.schedule();
        put(k, s.k_cut(), "k")?;
        put(t, s.t_cut(), "t")
    })
}

/// Univariate Pinsker constant of order `m`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_pinsker_uni(m: u32, out: *mut f64) -> EpCdeStatus {
    guard(|| put(out, pinsker_uni(m)?, "out"))
}

/// Anisotropic Pinsker constant for smoothness `(alpha, beta)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_pinsker_aniso(alpha: f64, beta: f64, out: *mut f64) -> EpCdeStatus {
    guard(|| put(out, pinsker_aniso(alpha, beta)?, "out"))
}

/// Closed-form and series minimax risk of the Sobolev class `(m_y, m_x)`
/// with radius `q` at difficulty `d` and sample size `n`.
///
/// # Safety
/// `closed` and `series` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_sobolev_risk(
    m_y: u32,
    m_x: u32,
    q: f64,
    d: f64,
    n: usize,
    closed: *mut f64,
    series: *mut f64,
) -> EpCdeStatus {
    guard(|| {
        let report = risk_report(&SmoothnessClass::sobolev(m_y, m_x, q)?, d, n)?;
        put(closed, report.risk_closed_form, "closed")?;
        put(series, report.risk_series.unwrap_or(f64::NAN), "series")
    })
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length including the NUL,
/// or 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or writable for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ep_cde_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ep_cde_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
