//! C ABI over the core toolkit: opaque field handles, integer status codes,
//! and a thread-local last-error message. All entry points are panic-safe.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qikdv::charges::charge_q0;
use qikdv::deformations::{anomaly, DeformationSpec, LocalFamily};
use qikdv::error::QiError;
use qikdv::grid::GridField;
use qikdv::pde::{evolve, Equation, EvolutionProblem, FieldState};

/// Status codes mirror the CLI exit codes.
pub const QIKDV_OK: c_int = 0;
pub const QIKDV_VALIDATION: c_int = 2;
pub const QIKDV_NUMERICAL: c_int = 3;
pub const QIKDV_IO: c_int = 4;
/// A caller-side contract violation (null pointer, bad enum value).
pub const QIKDV_USAGE: c_int = 5;
/// A panic crossed the boundary; the handle state is unspecified.
pub const QIKDV_PANIC: c_int = 6;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap());
}

fn status_of(err: &QiError) -> c_int {
    set_error(&err.to_string());
    err.exit_code()
}

/// Opaque periodic real field. Owned by the caller via create/free.
pub struct QikdvField {
    inner: GridField,
}

fn guard<F: FnOnce() -> c_int>(f: F) -> c_int {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            QIKDV_PANIC
        }
    }
}

/// Create a field of `n` samples on a periodic domain of the given length.
/// Returns null (and sets the error message) on invalid input.
///
/// # Safety
/// `values` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn qikdv_field_create(
    length: f64,
    n: usize,
    values: *const f64,
) -> *mut QikdvField {
    if values.is_null() {
        set_error("values pointer is null");
        return ptr::null_mut();
    }
    let slice = std::slice::from_raw_parts(values, n);
    match GridField::new(length, slice.to_vec()) {
        Ok(inner) => Box::into_raw(Box::new(QikdvField { inner })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// Analytic soliton profile sampler; eps selects the scaled-flow shape.
#[no_mangle]
pub extern "C" fn qikdv_soliton(
    length: f64,
    n: usize,
    c: f64,
    eps: f64,
    x0: f64,
) -> *mut QikdvField {
    if !(c > 0.0 && eps < 1.0) {
        set_error("soliton requires c > 0 and eps < 1");
        return ptr::null_mut();
    }
    let f = qikdv::pde::soliton_scaled(c, eps, x0, 0.0);
    match GridField::from_fn(length, n, |x| f(x, 0.0)) {
        Ok(inner) => Box::into_raw(Box::new(QikdvField { inner })),
        Err(e) => {
            set_error(&e.to_string());
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `field` must be a pointer returned by a qikdv constructor, or null.
#[no_mangle]
pub unsafe extern "C" fn qikdv_field_free(field: *mut QikdvField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qikdv_field_len(field: *const QikdvField) -> usize {
    if field.is_null() {
        return 0;
    }
    (*field).inner.n()
}

/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qikdv_field_length(field: *const QikdvField) -> f64 {
    if field.is_null() {
        return 0.0;
    }
    (*field).inner.length
}

/// Copy the samples into `out`, which must hold at least `n` doubles.
///
/// # Safety
/// `field` must be a live handle and `out` writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn qikdv_field_values(
    field: *const QikdvField,
    out: *mut f64,
    n: usize,
) -> c_int {
    if field.is_null() || out.is_null() {
        set_error("null handle or buffer");
        return QIKDV_USAGE;
    }
    let f = &(*field).inner;
    if n < f.n() {
        set_error("output buffer too small");
        return QIKDV_USAGE;
    }
    std::slice::from_raw_parts_mut(out, f.n()).copy_from_slice(&f.values);
    QIKDV_OK
}

/// Equation selectors for [`qikdv_evolve`].
pub const QIKDV_EQ_KDV: c_int = 0;
pub const QIKDV_EQ_DEFORMED_UUXX: c_int = 1;
pub const QIKDV_EQ_SCALED: c_int = 2;

fn equation_from(kind: c_int, epsilon: f64) -> Option<Equation> {
    match kind {
        0 => Some(Equation::Kdv),
        1 => Some(Equation::DeformedKdv {
            spec: DeformationSpec::LocalTerm {
                family: LocalFamily::Uuxx,
                epsilon,
            },
        }),
        2 => Some(Equation::ScaledKdv { epsilon }),
        _ => None,
    }
}

/// Evolve the field in place to `t_end`.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qikdv_evolve(
    field: *mut QikdvField,
    equation_kind: c_int,
    epsilon: f64,
    dt: f64,
    t_end: f64,
) -> c_int {
    if field.is_null() {
        set_error("null handle");
        return QIKDV_USAGE;
    }
    let Some(equation) = equation_from(equation_kind, epsilon) else {
        set_error("unknown equation selector");
        return QIKDV_USAGE;
    };
    let handle = &mut *field;
    guard(|| {
        let problem = EvolutionProblem { equation, dt, t_end };
        match evolve(&FieldState::Real(handle.inner.clone()), &problem, 0) {
            Ok(traj) => {
                let FieldState::Real(u) = &traj.last().unwrap().field else {
                    unreachable!()
                };
                handle.inner = u.clone();
                QIKDV_OK
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Zeroth anomalous charge of the field.
///
/// # Safety
/// `field` must be a live handle, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qikdv_charge_q0(field: *const QikdvField, out: *mut f64) -> c_int {
    if field.is_null() || out.is_null() {
        set_error("null handle or output");
        return QIKDV_USAGE;
    }
    let f = &(*field).inner;
    let out = &mut *out;
    guard(|| match charge_q0(f, 8) {
        Ok(v) => {
            *out = v;
            QIKDV_OK
        }
        Err(e) => status_of(&e),
    })
}

/// Deformation family selectors for [`qikdv_anomaly`].
pub const QIKDV_DEF_UUXX: c_int = 0;
pub const QIKDV_DEF_POWER_UX3: c_int = 1;
pub const QIKDV_DEF_UD2N1: c_int = 2;
pub const QIKDV_DEF_POWER: c_int = 3;

/// Anomaly function of the deformed Hamiltonian; allocates a new field
/// handle into `out`.
///
/// # Safety
/// `field` must be a live handle, `out` writable for one pointer.
#[no_mangle]
pub unsafe extern "C" fn qikdv_anomaly(
    field: *const QikdvField,
    family: c_int,
    epsilon: f64,
    out: *mut *mut QikdvField,
) -> c_int {
    if field.is_null() || out.is_null() {
        set_error("null handle or output");
        return QIKDV_USAGE;
    }
    let spec = match family {
        0 => DeformationSpec::LocalTerm {
            family: LocalFamily::Uuxx,
            epsilon,
        },
        1 => DeformationSpec::LocalTerm {
            family: LocalFamily::PowerUx(3),
            epsilon,
        },
        2 => DeformationSpec::LocalTerm {
            family: LocalFamily::Ud2n(1),
            epsilon,
        },
        3 => DeformationSpec::PowerDef { epsilon },
        _ => {
            set_error("unknown deformation selector");
            return QIKDV_USAGE;
        }
    };
    let f = &(*field).inner;
    let out = &mut *out;
    guard(|| match anomaly(f, &spec) {
        Ok(x) => {
            *out = Box::into_raw(Box::new(QikdvField { inner: x }));
            QIKDV_OK
        }
        Err(e) => {
            *out = ptr::null_mut();
            status_of(&e)
        }
    })
}

/// Message for the most recent failure on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn qikdv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
