//! C ABI over `rsma`. Every function returns an [`RsmaStatus`]; on failure
//! the message is kept per thread and read with [`rsma_last_error_message`].
//!
//! Complex arrays are interleaved `re, im` doubles. Precoders are stored
//! column-major, one column per active stream.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use rsma::allocation::mmf_allocation;
use rsma::channel::{db_to_linear, rician_sample_stream, ArrayGeometry, UserGeometry};
use rsma::constellation::{mode_dictionary, ModeDictionary};
use rsma::entropy::{McConfig, NoiseModel};
use rsma::layout::{CMatrix, CVector, StreamLayout};
use rsma::optimizer::{optimize_mmf, optimize_wsr, OptimizeResult, OptimizerConfig};
use rsma::rate::{rate_report, RateMethod, Receiver};
use rsma::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsmaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Degenerate = 3,
    Intractable = 4,
    InfeasibleNulling = 5,
    Dimension = 6,
    Unsupported = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsmaMethod {
    Approx = 0,
    Exact = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsmaReceiver {
    Sic = 0,
    SicFree = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsmaObjective {
    Wsr = 0,
    Mmf = 1,
}

/// User channels, `k` vectors of length `n_t`.
pub struct RsmaChannels {
    inner: Vec<CVector>,
}

pub struct RsmaDictionary {
    inner: ModeDictionary,
}

pub struct RsmaResult {
    inner: OptimizeResult,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> RsmaStatus {
    match e {
        Error::Config(_) => RsmaStatus::InvalidArgument,
        Error::Degenerate(_) => RsmaStatus::Degenerate,
        Error::Intractable { .. } => RsmaStatus::Intractable,
        Error::InfeasibleNulling { .. } => RsmaStatus::InfeasibleNulling,
        Error::Dimension(_) => RsmaStatus::Dimension,
        Error::Unsupported(_) => RsmaStatus::Unsupported,
        Error::Io(_) | Error::Json(_) => RsmaStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type FfiResult = Result<(), Failure>;

fn guard<F: FnOnce() -> FfiResult>(f: F) -> RsmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            RsmaStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            RsmaStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            RsmaStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            let s = status_of(&e);
            set_error(e.to_string());
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            RsmaStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

fn complex(xs: &[f64]) -> impl Iterator<Item = Complex64> + '_ {
    xs.chunks_exact(2).map(|c| Complex64::new(c[0], c[1]))
}

fn noise(sigma2: f64) -> Result<NoiseModel, Failure> {
    Ok(NoiseModel::new(sigma2)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rsma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated and
/// NUL-terminated) and returns the full message length without the NUL.
#[no_mangle]
pub unsafe extern "C" fn rsma_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds channels from `k * n_t` interleaved complex entries, user-major.
#[no_mangle]
pub unsafe extern "C" fn rsma_channels_new(
    n_t: usize,
    k: usize,
    entries: *const f64,
    out: *mut *mut RsmaChannels,
) -> RsmaStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if n_t == 0 || k == 0 {
            return Err(Failure::Arg("n_t and k must be positive".into()));
        }
        let xs = slice(entries, 2 * n_t * k, "entries")?;
        let inner = xs
            .chunks_exact(2 * n_t)
            .map(|h| CVector::from_iterator(n_t, complex(h)))
            .collect();
        *out = Box::into_raw(Box::new(RsmaChannels { inner }));
        Ok(())
    })
}

/// Draws Rician channels for a `n_y x n_z` half-wavelength array (`n_z = 1`
/// gives a linear array). Angles are in radians, Rician factors in dB.
#[allow(clippy::too_many_arguments)]
#[no_mangle]
pub unsafe extern "C" fn rsma_channels_sample(
    n_y: usize,
    n_z: usize,
    k: usize,
    theta_az: *const f64,
    theta_el: *const f64,
    kappa_db: *const f64,
    seed: u64,
    stream: u64,
    out: *mut *mut RsmaChannels,
) -> RsmaStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let geom = if n_z == 1 { ArrayGeometry::ula(n_y) } else { ArrayGeometry::ura(n_y, n_z) };
        geom.validate()?;
        if k == 0 {
            return Err(Failure::Arg("k must be positive".into()));
        }
        let az = slice(theta_az, k, "theta_az")?;
        let el = slice(theta_el, k, "theta_el")?;
        let kappa = slice(kappa_db, k, "kappa_db")?;
        let users: Vec<UserGeometry> = (0..k).map(|i| UserGeometry::new(az[i], el[i], db_to_linear(kappa[i]))).collect();
        let inner = rician_sample_stream(&geom, &users, seed, stream);
        *out = Box::into_raw(Box::new(RsmaChannels { inner }));
        Ok(())
    })
}

/// Copies the channels into `entries` (`2 * n_t * k` doubles, user-major).
#[no_mangle]
pub unsafe extern "C" fn rsma_channels_get(
    channels: *const RsmaChannels,
    entries: *mut f64,
    len: usize,
) -> RsmaStatus {
    guard(|| {
        let h = &handle(channels, "channels")?.inner;
        let need = 2 * h.len() * h[0].len();
        if len < need {
            return Err(Failure::Arg(format!("buffer holds {len} doubles, {need} needed")));
        }
        let dst = slice_mut(entries, need, "entries")?;
        for (i, x) in h.iter().flat_map(|v| v.iter()).enumerate() {
            dst[2 * i] = x.re;
            dst[2 * i + 1] = x.im;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rsma_channels_free(channels: *mut RsmaChannels) {
    if !channels.is_null() {
        drop(Box::from_raw(channels));
    }
}

/// Built-in mode dictionary for `k` users and `r_max_bits`.
#[no_mangle]
pub unsafe extern "C" fn rsma_dictionary_new(k: usize, r_max_bits: u32, out: *mut *mut RsmaDictionary) -> RsmaStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let inner = mode_dictionary(k, r_max_bits)?;
        *out = Box::into_raw(Box::new(RsmaDictionary { inner }));
        Ok(())
    })
}

/// Dictionary from JSON text.
#[no_mangle]
pub unsafe extern "C" fn rsma_dictionary_from_json(json: *const c_char, out: *mut *mut RsmaDictionary) -> RsmaStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| Failure::Arg("json is not UTF-8".into()))?;
        let inner = ModeDictionary::from_json_str(text)?;
        *out = Box::into_raw(Box::new(RsmaDictionary { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rsma_dictionary_len(dict: *const RsmaDictionary, out: *mut usize) -> RsmaStatus {
    guard(|| {
        let d = handle(dict, "dict")?;
        *out.as_mut().ok_or(Failure::Null("out"))? = d.inner.len();
        Ok(())
    })
}

/// Number of precoder columns of mode `mode` (zero-based) for the
/// dictionary's user count.
#[no_mangle]
pub unsafe extern "C" fn rsma_dictionary_streams(dict: *const RsmaDictionary, mode: usize, out: *mut usize) -> RsmaStatus {
    guard(|| {
        let d = &handle(dict, "dict")?.inner;
        let m = d
            .modes
            .get(mode)
            .ok_or_else(|| Failure::Arg(format!("mode {mode} out of range 0..{}", d.len())))?;
        *out.as_mut().ok_or(Failure::Null("out"))? = StreamLayout::single_group(m, d.k).n_streams();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rsma_dictionary_free(dict: *mut RsmaDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

fn mode_of(dict: &ModeDictionary, mode: usize, k: usize) -> Result<&rsma::constellation::TransmissionMode, Failure> {
    if dict.k != k {
        return Err(Failure::Arg(format!("dictionary is for {} users, channels have {k}", dict.k)));
    }
    dict.modes
        .get(mode)
        .ok_or_else(|| Failure::Arg(format!("mode {mode} out of range 0..{}", dict.len())))
}

/// Per-user rates of a precoder. `precoder` holds `2 * n_t * n_streams`
/// doubles, column-major. The three outputs take `k` doubles each:
/// common rate, SIC private rate and SIC-free private rate, clamped.
#[allow(clippy::too_many_arguments)]
#[no_mangle]
pub unsafe extern "C" fn rsma_rates(
    channels: *const RsmaChannels,
    dict: *const RsmaDictionary,
    mode: usize,
    precoder: *const f64,
    sigma2: f64,
    method: RsmaMethod,
    mc_samples: usize,
    mc_seed: u64,
    r_c: *mut f64,
    r_p_sic: *mut f64,
    r_p_sicfree: *mut f64,
) -> RsmaStatus {
    guard(|| {
        let h = &handle(channels, "channels")?.inner;
        let (k, n_t) = (h.len(), h[0].len());
        let m = mode_of(&handle(dict, "dict")?.inner, mode, k)?;
        let layout = StreamLayout::single_group(m, k);
        let xs = slice(precoder, 2 * n_t * layout.n_streams(), "precoder")?;
        let p = CMatrix::from_iterator(n_t, layout.n_streams(), complex(xs));
        let method = match method {
            RsmaMethod::Approx => RateMethod::Approx,
            RsmaMethod::Exact => RateMethod::Exact,
        };
        let mc = McConfig {
            samples: mc_samples,
            seed: mc_seed,
        };
        let rep = rate_report(&p, h, &layout, method, noise(sigma2)?, Some(mc))?;
        slice_mut(r_c, k, "r_c")?.copy_from_slice(&rep.r_c_per_user);
        slice_mut(r_p_sic, k, "r_p_sic")?.copy_from_slice(&rep.r_p_sic);
        slice_mut(r_p_sicfree, k, "r_p_sicfree")?.copy_from_slice(&rep.r_p_sicfree);
        Ok(())
    })
}

/// Max-min split of the common rate. Writes `k` shares to `c` and the
/// resulting minimum total rate to `min_rate`.
#[no_mangle]
pub unsafe extern "C" fn rsma_mmf_allocation(
    r_c: f64,
    r_p: *const f64,
    k: usize,
    c: *mut f64,
    min_rate: *mut f64,
) -> RsmaStatus {
    guard(|| {
        if k == 0 {
            return Err(Failure::Arg("k must be positive".into()));
        }
        if !(r_c >= 0.0) {
            return Err(Failure::Arg("r_c must be nonnegative".into()));
        }
        let rp = slice(r_p, k, "r_p")?;
        let (alloc, min) = mmf_allocation(r_c, rp);
        slice_mut(c, k, "c")?.copy_from_slice(&alloc.c);
        *min_rate.as_mut().ok_or(Failure::Null("min_rate"))? = min;
        Ok(())
    })
}

/// Optimizes the precoder of one mode with default ascent settings, power
/// budget `p_t` and restart seed `seed`. `weights` (`k` doubles) is read
/// for WSR only and may be null for equal weights.
#[allow(clippy::too_many_arguments)]
#[no_mangle]
pub unsafe extern "C" fn rsma_optimize(
    channels: *const RsmaChannels,
    dict: *const RsmaDictionary,
    mode: usize,
    receiver: RsmaReceiver,
    objective: RsmaObjective,
    weights: *const f64,
    p_t: f64,
    sigma2: f64,
    seed: u64,
    out: *mut *mut RsmaResult,
) -> RsmaStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let h = &handle(channels, "channels")?.inner;
        let k = h.len();
        let m = mode_of(&handle(dict, "dict")?.inner, mode, k)?;
        let rx = match receiver {
            RsmaReceiver::Sic => Receiver::Sic,
            RsmaReceiver::SicFree => Receiver::SicFree,
        };
        let cfg = OptimizerConfig {
            seed,
            ..OptimizerConfig::default().with_power(p_t)
        };
        let n = noise(sigma2)?;
        let inner = match objective {
            RsmaObjective::Wsr => {
                let w = if weights.is_null() { vec![1.0; k] } else { slice(weights, k, "weights")?.to_vec() };
                optimize_wsr(h, m, rx, &w, n, &cfg, None)?
            }
            RsmaObjective::Mmf => optimize_mmf(h, m, rx, n, &cfg, None)?,
        };
        *out = Box::into_raw(Box::new(RsmaResult { inner }));
        Ok(())
    })
}

/// Final objective, iteration count and convergence flag. Any output
/// pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn rsma_result_summary(
    result: *const RsmaResult,
    objective: *mut f64,
    iterations: *mut usize,
    converged: *mut bool,
    common_power_ratio: *mut f64,
) -> RsmaStatus {
    guard(|| {
        let r = &handle(result, "result")?.inner;
        if let Some(o) = objective.as_mut() {
            *o = r.objective();
        }
        if let Some(o) = iterations.as_mut() {
            *o = r.iterations;
        }
        if let Some(o) = converged.as_mut() {
            *o = r.converged;
        }
        if let Some(o) = common_power_ratio.as_mut() {
            *o = r.common_power_ratio;
        }
        Ok(())
    })
}

/// Precoder shape; pass null buffers to query it.
#[no_mangle]
pub unsafe extern "C" fn rsma_result_precoder(
    result: *const RsmaResult,
    entries: *mut f64,
    len: usize,
    rows: *mut usize,
    cols: *mut usize,
) -> RsmaStatus {
    guard(|| {
        let p = &handle(result, "result")?.inner.precoder;
        if let Some(r) = rows.as_mut() {
            *r = p.nrows();
        }
        if let Some(c) = cols.as_mut() {
            *c = p.ncols();
        }
        if entries.is_null() {
            return Ok(());
        }
        let need = 2 * p.len();
        if len < need {
            return Err(Failure::Arg(format!("buffer holds {len} doubles, {need} needed")));
        }
        let dst = slice_mut(entries, need, "entries")?;
        for (i, x) in p.iter().enumerate() {
            dst[2 * i] = x.re;
            dst[2 * i + 1] = x.im;
        }
        Ok(())
    })
}

/// Per-user total rates (`k` doubles) after the common-rate split.
#[no_mangle]
pub unsafe extern "C" fn rsma_result_user_rates(result: *const RsmaResult, rates: *mut f64, k: usize) -> RsmaStatus {
    guard(|| {
        let r = &handle(result, "result")?.inner;
        if k != r.user_rates.len() {
            return Err(Failure::Arg(format!("result has {} users, buffer {k}", r.user_rates.len())));
        }
        slice_mut(rates, k, "rates")?.copy_from_slice(&r.user_rates);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rsma_result_free(result: *mut RsmaResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_error_is_truncated_and_terminated() {
        set_error("abcdef".into());
        let mut buf = [1 as c_char; 4];
        let n = unsafe { rsma_last_error_message(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, 6);
        assert_eq!(unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap(), "abc");
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), RsmaStatus::Panic);
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Intractable { pairs: 1.0, budget: 0.0 }), RsmaStatus::Intractable);
        assert_eq!(status_of(&Error::Config(String::new())), RsmaStatus::InvalidArgument);
    }
}
