//! C ABI over `pds-core`.
//!
//! Objects cross the boundary as opaque heap handles created by `*_new` /
//! builder functions and released with the matching `*_free`. Every fallible
//! call returns a [`PdsStatus`]; on failure the message is available from
//! [`pds_last_error`] on the same thread. Outputs are written through
//! out-pointers only on success. Panics are caught and reported as
//! `PDS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use pds_core::filters::{
    build_parametric_r, build_space_a, build_statistical_r, ParametricFilterSpec, StatisticalFilterSpec,
};
use pds_core::grid::{load_grid, save_grid};
use pds_core::sampler::{run, SamplerConfig, StepSchedule};
use pds_core::{
    AnalyticTarget, DMatrix, Field, GaussianTarget, GridShape, GrfTarget, MixtureTarget, PdsError, Preconditioner,
    ScoreTarget, SkewOperator, Solenoidal, Target,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    NotInvertible = 4,
    Io = 5,
    Format = 6,
    Diverged = 7,
    NonFiniteScore = 8,
    Unsupported = 9,
    Panic = 10,
}

/// Real C×H×W grid.
pub struct PdsField(Field);

/// Space and frequency filter pair.
pub struct PdsPreconditioner(Preconditioner);

/// Analytic target distribution.
pub struct PdsTarget(Target);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &PdsError) -> PdsStatus {
    match e {
        PdsError::ShapeMismatch { .. } | PdsError::LengthMismatch { .. } | PdsError::DimensionMismatch { .. } => {
            PdsStatus::ShapeMismatch
        }
        PdsError::NearZeroDivisor { .. } | PdsError::NonPositiveFilter { .. } | PdsError::NotPositiveDefinite(_) => {
            PdsStatus::NotInvertible
        }
        PdsError::Io(_) => PdsStatus::Io,
        PdsError::Format(_) => PdsStatus::Format,
        PdsError::Diverged { .. } => PdsStatus::Diverged,
        PdsError::NonFiniteScore { .. } => PdsStatus::NonFiniteScore,
        PdsError::Unsupported(_) => PdsStatus::Unsupported,
        _ => PdsStatus::InvalidArgument,
    }
}

struct Failure(PdsStatus, String);

impl From<PdsError> for Failure {
    fn from(e: PdsError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PdsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PdsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PdsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside pds".into());
            PdsStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn shape(channels: usize, height: usize, width: usize) -> Result<GridShape, Failure> {
    Ok(GridShape::new(channels, height, width)?)
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure(PdsStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn field_list(samples: *const *const PdsField, count: usize) -> Result<Vec<Field>, Failure> {
    if samples.is_null() {
        return Err(null("samples"));
    }
    std::slice::from_raw_parts(samples, count)
        .iter()
        .map(|p| borrow(*p, "sample").map(|f| f.0.clone()))
        .collect()
}

/// Message of the last failed call on this thread; empty if none. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// New field; `data` (row-major, `channels*height*width` values) may be null
/// for zeros.
///
/// # Safety
/// `data`, if non-null, must point to that many readable doubles.
#[no_mangle]
pub unsafe extern "C" fn pds_field_new(
    channels: usize,
    height: usize,
    width: usize,
    data: *const f64,
    out: *mut *mut PdsField,
) -> PdsStatus {
    guard(|| {
        let s = shape(channels, height, width)?;
        let f = if data.is_null() {
            Field::zeros(s)
        } else {
            Field::new(s, std::slice::from_raw_parts(data, s.len()).to_vec())?
        };
        emit(out, PdsField(f))
    })
}

/// # Safety
/// `field` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pds_field_free(field: *mut PdsField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// Non-null pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pds_field_shape(
    field: *const PdsField,
    channels: *mut usize,
    height: *mut usize,
    width: *mut usize,
) -> PdsStatus {
    guard(|| {
        let s = borrow(field, "field")?.0.shape();
        for (p, v) in [(channels, s.channels()), (height, s.height()), (width, s.width())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the values into `out`, which holds `len` doubles; `len` must equal
/// the field length.
///
/// # Safety
/// `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pds_field_read(field: *const PdsField, out: *mut f64, len: usize) -> PdsStatus {
    guard(|| {
        let f = &borrow(field, "field")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != f.len() {
            return Err(PdsError::DimensionMismatch { expected: f.len(), found: len }.into());
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(f.as_slice());
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pds_field_load(path: *const c_char, out: *mut *mut PdsField) -> PdsStatus {
    guard(|| emit(out, PdsField(load_grid(path_arg(path)?)?)))
}

/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pds_field_save(field: *const PdsField, path: *const c_char) -> PdsStatus {
    guard(|| Ok(save_grid(path_arg(path)?, &borrow(field, "field")?.0)?))
}

/// Two-level frequency filter in centered order.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pds_filter_parametric(
    channels: usize,
    height: usize,
    width: usize,
    radius: f64,
    lambda: f64,
    out: *mut *mut PdsField,
) -> PdsStatus {
    guard(|| {
        let spec = ParametricFilterSpec::new(radius, lambda)?;
        emit(out, PdsField(build_parametric_r(shape(channels, height, width)?, &spec)))
    })
}

/// Frequency filter from sample statistics.
///
/// # Safety
/// `samples` must point to `count` valid field handles.
#[no_mangle]
pub unsafe extern "C" fn pds_filter_statistical(
    samples: *const *const PdsField,
    count: usize,
    alpha: f64,
    out: *mut *mut PdsField,
) -> PdsStatus {
    guard(|| {
        let spec = StatisticalFilterSpec::new(alpha)?;
        let r = build_statistical_r(&field_list(samples, count)?, &spec)?;
        emit(out, PdsField(r))
    })
}

/// Space filter from nonnegative samples.
///
/// # Safety
/// `samples` must point to `count` valid field handles.
#[no_mangle]
pub unsafe extern "C" fn pds_filter_space(
    samples: *const *const PdsField,
    count: usize,
    out: *mut *mut PdsField,
) -> PdsStatus {
    guard(|| emit(out, PdsField(build_space_a(&field_list(samples, count)?)?)))
}

/// # Safety
/// `a` and `r` must be valid field handles.
#[no_mangle]
pub unsafe extern "C" fn pds_preconditioner_new(
    a: *const PdsField,
    r: *const PdsField,
    out: *mut *mut PdsPreconditioner,
) -> PdsStatus {
    guard(|| {
        let p = Preconditioner::new(borrow(a, "a")?.0.clone(), borrow(r, "r")?.0.clone())?;
        emit(out, PdsPreconditioner(p))
    })
}

/// # Safety
/// `p` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pds_preconditioner_free(p: *mut PdsPreconditioner) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdsOperator {
    M = 0,
    MInverse = 1,
    Drift = 2,
}

/// `M x`, `M⁻¹ x` or `M⁻¹M⁻ᵀ x` into a new field.
///
/// # Safety
/// Handles must be valid.
#[no_mangle]
pub unsafe extern "C" fn pds_preconditioner_apply(
    p: *const PdsPreconditioner,
    op: PdsOperator,
    x: *const PdsField,
    out: *mut *mut PdsField,
) -> PdsStatus {
    guard(|| {
        let p = &borrow(p, "preconditioner")?.0;
        let x = &borrow(x, "x")?.0;
        let y = match op {
            PdsOperator::M => p.apply_m(x)?,
            PdsOperator::MInverse => p.apply_m_inverse(x)?,
            PdsOperator::Drift => p.apply_drift_precondition(x)?,
        };
        emit(out, PdsField(y))
    })
}

/// `N(mean, cov)`; `cov` is row-major `n×n` with `n` the mean's length.
///
/// # Safety
/// `cov` must point to `n*n` doubles.
#[no_mangle]
pub unsafe extern "C" fn pds_target_gaussian(
    mean: *const PdsField,
    cov: *const f64,
    out: *mut *mut PdsTarget,
) -> PdsStatus {
    guard(|| {
        let mean = borrow(mean, "mean")?.0.clone();
        if cov.is_null() {
            return Err(null("cov"));
        }
        let n = mean.len();
        let m = DMatrix::from_row_slice(n, n, std::slice::from_raw_parts(cov, n * n));
        emit(out, PdsTarget(Target::Gaussian(GaussianTarget::new(mean, m)?)))
    })
}

/// Power-law Gaussian random field.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pds_target_grf(
    channels: usize,
    height: usize,
    width: usize,
    condition: f64,
    decay: f64,
    out: *mut *mut PdsTarget,
) -> PdsStatus {
    guard(|| {
        let t = GrfTarget::power_law(shape(channels, height, width)?, condition, decay)?;
        emit(out, PdsTarget(Target::Grf(t)))
    })
}

/// `½ N(offset, σ² I) + ½ N(−offset, σ² I)`.
///
/// # Safety
/// `offset` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn pds_target_mixture_pair(
    offset: *const PdsField,
    variance: f64,
    out: *mut *mut PdsTarget,
) -> PdsStatus {
    guard(|| {
        let t = MixtureTarget::symmetric_pair(borrow(offset, "offset")?.0.clone(), variance)?;
        emit(out, PdsTarget(Target::Mixture(t)))
    })
}

/// # Safety
/// `t` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pds_target_free(t: *mut PdsTarget) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// Handles must be valid.
#[no_mangle]
pub unsafe extern "C" fn pds_target_score(
    t: *const PdsTarget,
    x: *const PdsField,
    out: *mut *mut PdsField,
) -> PdsStatus {
    guard(|| {
        let s = borrow(t, "target")?.0.score(&borrow(x, "x")?.0)?;
        emit(out, PdsField(s))
    })
}

/// Log density up to an additive constant.
///
/// # Safety
/// Handles must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pds_target_log_density(t: *const PdsTarget, x: *const PdsField, out: *mut f64) -> PdsStatus {
    guard(|| {
        let v = borrow(t, "target")?.0.log_density(&borrow(x, "x")?.0)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = v;
        Ok(())
    })
}

/// Sampler settings; `preconditioner` may be null for vanilla Langevin.
/// `skew` is 0 for none, 1–6 for the shift operators, 7 for the spectral
/// transpose difference.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PdsSamplerOptions {
    pub iterations: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub skew: u32,
    pub omega: f64,
    pub denoise_final: bool,
}

/// Runs chain 0 and returns its final state; `x0` may be null for a standard
/// normal start.
///
/// # Safety
/// Non-null handles must be valid.
#[no_mangle]
pub unsafe extern "C" fn pds_sample(
    t: *const PdsTarget,
    preconditioner: *const PdsPreconditioner,
    options: PdsSamplerOptions,
    x0: *const PdsField,
    out: *mut *mut PdsField,
) -> PdsStatus {
    guard(|| {
        let target = &borrow(t, "target")?.0;
        let schedule = StepSchedule::constant(options.iterations, options.epsilon)?;
        let solenoidal = match options.skew {
            0 => None,
            7 => Some(Solenoidal::new(SkewOperator::SpectralTransposeDiff, options.omega)?),
            k => Some(Solenoidal::new(SkewOperator::numbered(k as usize)?, options.omega)?),
        };
        let mut config = SamplerConfig::vanilla(schedule, options.seed);
        config.preconditioner = preconditioner.as_ref().map(|p| p.0.clone());
        config.solenoidal = solenoidal;
        config.denoise_final = options.denoise_final;
        let x0 = x0.as_ref().map(|f| f.0.clone());
        emit(out, PdsField(run(target, &config, x0)?.final_state))
    })
}
