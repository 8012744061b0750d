//! C ABI for `qcompat`.
//!
//! Every fallible call returns a [`QcStatus`]; on failure a message is kept per
//! thread and can be copied out with [`qc_last_error_message`]. Devices and
//! channels are opaque handles released with their `_free` function. Matrices
//! cross the boundary as separate row-major real and imaginary arrays.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qcompat::devices::{depolarizing, detect_depolarizing, Channel};
use qcompat::feasibility::{
    check, empirical_boundary, Direction, FeasibilityProblem, FeasibilityStatus,
};
use qcompat::numkit::{CMatrix, HermitianMatrix, C64, STRUCTURAL_TOL};
use qcompat::regions::{
    in_region, noise_coeffs, s_interval, sample_boundary, PairKind, RegionQuery,
};
use qcompat::verify::{self, Device, DeviceName, NamedDevice, VerifyOptions};
use qcompat::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcStatus {
    Ok = 0,
    NullPointer = 1,
    /// A parameter is outside its admissible range, non-finite, or malformed.
    InvalidArgument = 2,
    /// Sizes do not fit together.
    Dimension = 3,
    /// The construction does not exist in this dimension.
    Unsupported = 4,
    /// Input matrices do not describe a valid device.
    InvalidDevice = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcPair {
    /// Two noisy sharp meters.
    MeterMeter = 0,
    /// Two depolarizing channels.
    ChannelChannel = 1,
    /// A noisy sharp meter and a depolarizing channel.
    MeterChannel = 2,
}

impl From<QcPair> for PairKind {
    fn from(p: QcPair) -> Self {
        match p {
            QcPair::MeterMeter => PairKind::QP,
            QcPair::ChannelChannel => PairKind::II,
            QcPair::MeterChannel => PairKind::QI,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcDeviceKind {
    Meter = 0,
    Cloner = 1,
    Instrument = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcFeasibility {
    Feasible = 0,
    InfeasibleEvidence = 1,
    Undetermined = 2,
}

/// Summary of a device verification.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QcReport {
    /// Largest margin, normalization or trace-preservation residual.
    pub max_residual: f64,
    /// Smallest eigenvalue over effects, Choi operators or branches.
    pub psd_margin: f64,
    pub passed: bool,
}

/// Opaque joint device built from the named vocabulary.
pub struct QcDevice(NamedDevice);

/// Opaque channel.
pub struct QcChannel(Channel);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> QcStatus {
    match e {
        Error::Dimension(_) => QcStatus::Dimension,
        Error::NonFinite | Error::Inadmissible { .. } | Error::Budget(_) => {
            QcStatus::InvalidArgument
        }
        Error::Unsupported(..) => QcStatus::Unsupported,
        Error::NotHermitian(_) | Error::InvalidDevice(_) | Error::NonProduct | Error::NotMub => {
            QcStatus::InvalidDevice
        }
    }
}

/// Runs `f`, recording errors and containing panics.
fn guard(f: impl FnOnce() -> Result<(), QcStatusError>) -> QcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            QcStatus::Ok
        }
        Ok(Err(QcStatusError(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QcStatus::Panic
        }
    }
}

struct QcStatusError(QcStatus, String);

impl From<Error> for QcStatusError {
    fn from(e: Error) -> Self {
        QcStatusError(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> QcStatusError {
    QcStatusError(QcStatus::NullPointer, format!("{what} is null"))
}

/// Writes through `out` after checking it.
unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), QcStatusError> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Copies the message of the last failed call on this thread into `buf`,
/// truncating to `len - 1` bytes plus a terminating NUL. Returns the full
/// message length without the NUL; `buf` may be null to query it.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Closed-form membership of `(s, t)` in the compatibility region.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_in_region(
    pair: QcPair,
    d: usize,
    s: f64,
    t: f64,
    extended: bool,
    out: *mut bool,
) -> QcStatus {
    guard(|| {
        let inside = in_region(&RegionQuery::new(pair.into(), d, s, t, extended))?;
        put(out, inside, "out")
    })
}

/// Admissible `s`-interval of the extended region at fixed `t`.
///
/// # Safety
/// `lo` and `hi` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qc_s_interval(
    pair: QcPair,
    d: usize,
    t: f64,
    lo: *mut f64,
    hi: *mut f64,
) -> QcStatus {
    guard(|| {
        if lo.is_null() || hi.is_null() {
            return Err(null("output"));
        }
        let (a, b) = s_interval(pair.into(), d, t)?;
        put(lo, a, "lo")?;
        put(hi, b, "hi")
    })
}

/// Writes `n` boundary points into `s_out` and `t_out`.
///
/// # Safety
/// `s_out` and `t_out` must each point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qc_sample_boundary(
    pair: QcPair,
    d: usize,
    extended: bool,
    n: usize,
    s_out: *mut f64,
    t_out: *mut f64,
) -> QcStatus {
    guard(|| {
        if s_out.is_null() || t_out.is_null() {
            return Err(null("output"));
        }
        let points = sample_boundary(pair.into(), d, extended, n)?;
        for (i, (s, t)) in points.into_iter().take(n).enumerate() {
            *s_out.add(i) = s;
            *t_out.add(i) = t;
        }
        Ok(())
    })
}

/// Noise coefficients `a_k(r)` and `b(r)` with effective dimension `d^k`, `k ∈ {1, 2}`.
///
/// # Safety
/// `a` and `b` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qc_noise_coeffs(
    k: u32,
    d: usize,
    r: f64,
    a: *mut f64,
    b: *mut f64,
) -> QcStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return Err(null("output"));
        }
        let c = noise_coeffs(k, d, r)?;
        put(a, c.a, "a")?;
        put(b, c.b, "b")
    })
}

/// Builds a named joint device such as `"g-opt"` or `"gamma-corner"`.
/// `has_param` selects whether `param` is used; parametric devices fall back
/// to 0.5 without it.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_device_new(
    name: *const c_char,
    d: usize,
    has_param: bool,
    param: f64,
    out: *mut *mut QcDevice,
) -> QcStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let name = CStr::from_ptr(name).to_str().map_err(|_| {
            QcStatusError(QcStatus::InvalidArgument, "device name is not UTF-8".into())
        })?;
        let name: DeviceName = name.parse()?;
        let device = verify::build(name, d, has_param.then_some(param))?;
        out.write(Box::into_raw(Box::new(QcDevice(device))));
        Ok(())
    })
}

/// Releases a device; null is ignored.
///
/// # Safety
/// `device` must be null or come from [`qc_device_new`] and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn qc_device_free(device: *mut QcDevice) {
    if !device.is_null() {
        drop(Box::from_raw(device));
    }
}

fn device_matrices(device: &QcDevice) -> Vec<&HermitianMatrix> {
    match &device.0.device {
        Device::Meter(m) => m.effects().iter().collect(),
        Device::Cloner(c) => vec![c.choi()],
        Device::Instrument(j) => (0..j.len()).map(|x| j.branch(x)).collect(),
    }
}

/// Kind, dimension and number of stored matrices of a device. Any output may be null.
///
/// # Safety
/// `device` must be a live handle; non-null outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qc_device_info(
    device: *const QcDevice,
    kind: *mut QcDeviceKind,
    dim: *mut usize,
    matrices: *mut usize,
) -> QcStatus {
    guard(|| {
        let device = device.as_ref().ok_or_else(|| null("device"))?;
        if !kind.is_null() {
            kind.write(match device.0.device {
                Device::Meter(_) => QcDeviceKind::Meter,
                Device::Cloner(_) => QcDeviceKind::Cloner,
                Device::Instrument(_) => QcDeviceKind::Instrument,
            });
        }
        if !dim.is_null() {
            dim.write(device.0.dim);
        }
        if !matrices.is_null() {
            matrices.write(device_matrices(device).len());
        }
        Ok(())
    })
}

/// Copies matrix `index` of a device: effects of a meter (row-major outcome
/// order), the normalized Choi operator of a cloner, or the Choi blocks of an
/// instrument. `size` receives the side length; the arrays need `size²` entries.
/// Pass null arrays to query `size` only.
///
/// # Safety
/// `device` must be a live handle; `re`/`im` must be null or hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn qc_device_matrix(
    device: *const QcDevice,
    index: usize,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    size: *mut usize,
) -> QcStatus {
    guard(|| {
        let device = device.as_ref().ok_or_else(|| null("device"))?;
        let mats = device_matrices(device);
        let m = mats.get(index).ok_or_else(|| {
            QcStatusError(
                QcStatus::InvalidArgument,
                format!("matrix index {index} out of range"),
            )
        })?;
        let n = m.dim();
        put(size, n, "size")?;
        if re.is_null() && im.is_null() {
            return Ok(());
        }
        if re.is_null() || im.is_null() {
            return Err(null("re or im"));
        }
        if capacity < n * n {
            return Err(QcStatusError(
                QcStatus::BufferTooSmall,
                format!("need {} entries, got {capacity}", n * n),
            ));
        }
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                *re.add(i * n + j) = z.re;
                *im.add(i * n + j) = z.im;
            }
        }
        Ok(())
    })
}

/// Verifies a device against its expected margins at tolerance 1e-10.
///
/// # Safety
/// `device` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_device_check(device: *const QcDevice, out: *mut QcReport) -> QcStatus {
    guard(|| {
        let device = device.as_ref().ok_or_else(|| null("device"))?;
        let report = verify::check_device(&device.0)?;
        put(
            out,
            QcReport {
                max_residual: report.max_residual(),
                psd_margin: report.psd_margin,
                passed: report.passed(STRUCTURAL_TOL),
            },
            "out",
        )
    })
}

/// The depolarizing channel `I_r` on `C^d`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_channel_depolarizing(
    d: usize,
    r: f64,
    out: *mut *mut QcChannel,
) -> QcStatus {
    guard(|| {
        let ch = depolarizing(d, r)?;
        put(out, Box::into_raw(Box::new(QcChannel(ch))), "out")
    })
}

/// A channel from its normalized Choi operator (trace one, input factor
/// first), given as row-major arrays of `(in_dim·out_dim)²` entries.
///
/// # Safety
/// `re` and `im` must point to `(in_dim·out_dim)²` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qc_channel_from_choi(
    in_dim: usize,
    out_dim: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut QcChannel,
) -> QcStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null("re or im"));
        }
        let n = in_dim
            .checked_mul(out_dim)
            .ok_or_else(|| QcStatusError(QcStatus::Dimension, "size overflow".into()))?;
        let m = CMatrix::from_fn(n, n, |i, j| {
            C64::new(*re.add(i * n + j), *im.add(i * n + j))
        });
        if !m.is_finite() {
            return Err(Error::NonFinite.into());
        }
        let ch = Channel::from_choi(in_dim, out_dim, HermitianMatrix::new(m)?)?;
        put(out, Box::into_raw(Box::new(QcChannel(ch))), "out")
    })
}

/// Releases a channel; null is ignored.
///
/// # Safety
/// `channel` must be null or a handle from this library not freed yet.
#[no_mangle]
pub unsafe extern "C" fn qc_channel_free(channel: *mut QcChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// Tests whether a channel is depolarizing; on success `r` receives its parameter.
///
/// # Safety
/// `channel` must be a live handle; `found` and `r` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qc_detect_depolarizing(
    channel: *const QcChannel,
    tol: f64,
    found: *mut bool,
    r: *mut f64,
) -> QcStatus {
    guard(|| {
        let channel = channel.as_ref().ok_or_else(|| null("channel"))?;
        if found.is_null() || r.is_null() {
            return Err(null("output"));
        }
        let hit = detect_depolarizing(&channel.0, tol);
        found.write(hit.is_some());
        r.write(hit.unwrap_or(f64::NAN));
        Ok(())
    })
}

/// Runs the self-check suites for the given dimensions and reports the number
/// of passed and failed checks.
///
/// # Safety
/// `dims` must point to `n_dims` values; `passed` and `failed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn qc_verify(
    dims: *const usize,
    n_dims: usize,
    passed: *mut usize,
    failed: *mut usize,
) -> QcStatus {
    guard(|| {
        if dims.is_null() || passed.is_null() || failed.is_null() {
            return Err(null("argument"));
        }
        let options = VerifyOptions {
            dims: std::slice::from_raw_parts(dims, n_dims).to_vec(),
            ..VerifyOptions::default()
        };
        let reports = verify::run(&options)?;
        passed.write(reports.iter().map(|r| r.passed).sum());
        failed.write(reports.iter().map(|r| r.failures.len()).sum());
        Ok(())
    })
}

/// One run of the numerical oracle at `(s, t)`.
///
/// # Safety
/// `status`, `iterations` and `residual` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn qc_feasibility_check(
    pair: QcPair,
    d: usize,
    s: f64,
    t: f64,
    budget: usize,
    status: *mut QcFeasibility,
    iterations: *mut usize,
    residual: *mut f64,
) -> QcStatus {
    guard(|| {
        if status.is_null() || iterations.is_null() || residual.is_null() {
            return Err(null("output"));
        }
        let problem = FeasibilityProblem {
            kind: pair.into(),
            dim: d,
            s,
            t,
        };
        let r = check(&problem, budget)?;
        status.write(match r.status {
            FeasibilityStatus::Feasible(_) => QcFeasibility::Feasible,
            FeasibilityStatus::InfeasibleEvidence(_) => QcFeasibility::InfeasibleEvidence,
            FeasibilityStatus::Undetermined => QcFeasibility::Undetermined,
        });
        iterations.write(r.iterations);
        residual.write(r.residual);
        Ok(())
    })
}

/// Oracle estimate of the largest (`maximize`) or smallest compatible `s` at `t`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qc_oracle_boundary(
    pair: QcPair,
    d: usize,
    t: f64,
    maximize: bool,
    budget: usize,
    out: *mut f64,
) -> QcStatus {
    guard(|| {
        let direction = if maximize {
            Direction::Max
        } else {
            Direction::Min
        };
        let s = empirical_boundary(pair.into(), d, t, direction, budget)?;
        put(out, s, "out")
    })
}
