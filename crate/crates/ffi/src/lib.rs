//! C ABI over `parentham`. Objects are opaque heap handles released with the
//! matching `*_free` function; every fallible call returns a [`PhStatus`] and
//! leaves a message retrievable with [`ph_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use parentham::experiment::{run_experiment, ExperimentConfig};
use parentham::operators::{
    build_collective_basis, build_nearest_neighbor_basis, build_pauli_basis, OperatorBasis, Sector,
};
use parentham::paths::{
    ising_h_analytic, InterpolationAngle, InterpolationPath, IsingPath, PspinPath, SingleSpinPath, StatePath,
};
use parentham::solver::optimal_couplings;
use parentham::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    ResourceLimit = 4,
    Degenerate = 5,
    Numerical = 6,
    Io = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PhStatus {
    match e {
        Error::InvalidInput(_) | Error::NotHermitian(_) | Error::NotNormalized(_) | Error::NotPure(_) => {
            PhStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } => PhStatus::DimensionMismatch,
        Error::ResourceLimit { .. } => PhStatus::ResourceLimit,
        Error::Degenerate { .. } | Error::SingularPath { .. } => PhStatus::Degenerate,
        Error::OutOfRange { .. } => PhStatus::InvalidArgument,
        Error::Numerical(_) => PhStatus::Numerical,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => PhStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PhStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            PhStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PhStatus::Panic
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    p.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ph_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ph_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ph_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Opaque operator basis.
pub struct PhBasis {
    inner: OperatorBasis,
}

/// Opaque state path.
pub struct PhPath {
    inner: Box<dyn StatePath>,
}

unsafe fn put_basis(out: *mut *mut PhBasis, b: OperatorBasis) -> Result<(), Failure> {
    write_out(out, Box::into_raw(Box::new(PhBasis { inner: b })), "out")
}

unsafe fn put_path(out: *mut *mut PhPath, p: Box<dyn StatePath>) -> Result<(), Failure> {
    write_out(out, Box::into_raw(Box::new(PhPath { inner: p })), "out")
}

/// Single-site and nearest-neighbour Pauli products on a periodic chain of `l` sites.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ph_basis_nearest_neighbor(l: usize, out: *mut *mut PhBasis) -> PhStatus {
    guard(|| put_basis(out, build_nearest_neighbor_basis(l)?))
}

/// All Pauli strings on `l` sites, with or without the identity.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ph_basis_pauli(l: usize, include_identity: bool, out: *mut *mut PhBasis) -> PhStatus {
    guard(|| put_basis(out, build_pauli_basis(l, include_identity)?))
}

/// Collective interactions up to `weight` on the symmetric sector of `n` spins.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ph_basis_collective(n: usize, weight: usize, out: *mut *mut PhBasis) -> PhStatus {
    guard(|| put_basis(out, build_collective_basis(n, weight, Sector::Symmetric)?))
}

/// # Safety
/// `basis` must be a live handle and `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn ph_basis_len(basis: *const PhBasis, out_len: *mut usize) -> PhStatus {
    guard(|| write_out(out_len, deref(basis, "basis")?.inner.len(), "out_len"))
}

/// Hilbert-space dimension of the basis operators.
///
/// # Safety
/// `basis` must be a live handle and `out_dim` writable.
#[no_mangle]
pub unsafe extern "C" fn ph_basis_dim(basis: *const PhBasis, out_dim: *mut usize) -> PhStatus {
    guard(|| write_out(out_dim, deref(basis, "basis")?.inner.dim(), "out_dim"))
}

/// Label of element `index` as a new string (free with `ph_string_free`).
///
/// # Safety
/// `basis` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ph_basis_label(basis: *const PhBasis, index: usize, out: *mut *mut c_char) -> PhStatus {
    guard(|| {
        let b = &deref(basis, "basis")?.inner;
        let label = b.labels().get(index).ok_or_else(|| {
            invalid(format!(
                "index {index} out of range for a basis of {} elements",
                b.len()
            ))
        })?;
        let c = CString::new(label.as_str()).map_err(|e| invalid(e.to_string()))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `basis` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ph_basis_free(basis: *mut PhBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Ground states of the transverse-field Ising chain with `l` (even) sites.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ph_path_ising(l: usize, out: *mut *mut PhPath) -> PhStatus {
    guard(|| put_path(out, Box::new(IsingPath::new(l)?)))
}

/// Ground states of the p-spin model with `n` spins (symmetric sector).
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ph_path_pspin(n: usize, p: u32, out: *mut *mut PhPath) -> PhStatus {
    guard(|| put_path(out, Box::new(PspinPath::new(n, p)?)))
}

/// The rotating spin-1/2; the path parameter is time.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ph_path_single_spin(omega: f64, out: *mut *mut PhPath) -> PhStatus {
    guard(|| put_path(out, Box::new(SingleSpinPath::new(omega)?)))
}

/// Interpolation between the p = 3 endpoint ground states of `n` spins.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn ph_path_interpolate(n: usize, quarter: bool, out: *mut *mut PhPath) -> PhStatus {
    let angle = if quarter {
        InterpolationAngle::Quarter
    } else {
        InterpolationAngle::FullTurn
    };
    guard(|| put_path(out, Box::new(InterpolationPath::new(n, angle)?)))
}

/// # Safety
/// `path` must be a live handle and `out_dim` writable.
#[no_mangle]
pub unsafe extern "C" fn ph_path_dim(path: *const PhPath, out_dim: *mut usize) -> PhStatus {
    guard(|| write_out(out_dim, deref(path, "path")?.inner.dim(), "out_dim"))
}

/// # Safety
/// `path` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ph_path_free(path: *mut PhPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Minimal-norm optimal couplings at `lambda` for the rate `dlambda`.
/// `out_values` must hold exactly `out_len` = basis length doubles;
/// `out_local_cost` may be NULL.
///
/// # Safety
/// Handles must be live; `out_values` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ph_optimal_couplings(
    path: *const PhPath,
    basis: *const PhBasis,
    lambda: f64,
    dlambda: f64,
    tol_rel: f64,
    out_values: *mut f64,
    out_len: usize,
    out_local_cost: *mut f64,
) -> PhStatus {
    guard(|| {
        let p = &deref(path, "path")?.inner;
        let b = &deref(basis, "basis")?.inner;
        if out_values.is_null() {
            return Err(Failure::Null("out_values"));
        }
        if out_len != b.len() {
            return Err(Error::DimensionMismatch {
                expected: b.len(),
                found: out_len,
            }
            .into());
        }
        let state = p.psi(lambda)?;
        let drho = p.drho_dlambda(lambda)?.scaled(dlambda);
        let s = optimal_couplings(&state, &drho, b, tol_rel)?;
        std::slice::from_raw_parts_mut(out_values, out_len).copy_from_slice(&s.couplings.values);
        if !out_local_cost.is_null() {
            out_local_cost.write(s.projection.local_cost);
        }
        Ok(())
    })
}

/// Closed-form nearest-neighbour XY coupling of the Ising chain.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ph_ising_h_analytic(l: usize, lambda: f64, dlambda: f64, out: *mut f64) -> PhStatus {
    guard(|| {
        if l < 2 || !l.is_multiple_of(2) {
            return Err(invalid(format!("Ising size must be even and >= 2, got {l}")).into());
        }
        write_out(out, ising_h_analytic(l, lambda, dlambda), "out")
    })
}

/// Runs an experiment described by a JSON configuration and returns the
/// manifest as a new JSON string (free with `ph_string_free`).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out_manifest_json` writable.
#[no_mangle]
pub unsafe extern "C" fn ph_run_experiment_json(
    config_json: *const c_char,
    out_manifest_json: *mut *mut c_char,
) -> PhStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(Failure::Null("config_json"));
        }
        if out_manifest_json.is_null() {
            return Err(Failure::Null("out_manifest_json"));
        }
        let text = CStr::from_ptr(config_json)
            .to_str()
            .map_err(|e| invalid(format!("configuration is not UTF-8: {e}")))?;
        let cfg = ExperimentConfig::from_text(text)?;
        cfg.validate()?;
        let manifest = run_experiment(&cfg)?;
        let json = serde_json::to_string(&manifest).map_err(Error::from)?;
        let c = CString::new(json).map_err(|e| invalid(e.to_string()))?;
        write_out(out_manifest_json, c.into_raw(), "out_manifest_json")
    })
}
