//! C ABI over `hjreact`.
//!
//! Objects are opaque handles created by `*_new` functions and released by
//! the matching `*_free`. Every fallible call returns an `HjStatus`; on
//! failure a message for the current thread is available from
//! `hj_last_error`. Panics are caught and reported as `HJ_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hjreact::pes::{default_seeds, NewtonSettings, StationaryKind};
use hjreact::quantum::{initial_packet, restricted_norm, GridSpec, Propagator};
use hjreact::reaction_path::{build_full_path, DescentSettings, ReactionPath};
use hjreact::{Error, FrontierLine, PesModel, Vec2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HjStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NonConvergence = 3,
    Topology = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    OutOfRange = 8,
    Panic = 9,
}

/// Surface model handle.
pub struct HjModel(PesModel);

/// Reaction path handle.
pub struct HjPath(ReactionPath);

/// Wave-packet propagator handle.
pub struct HjPropagator(Propagator);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HjStationaryPoint {
    pub x: f64,
    pub y: f64,
    pub energy: f64,
    /// 0 minimum, 1 saddle, 2 other.
    pub kind: i32,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct HjPathPoint {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub energy: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> HjStatus {
    match err {
        Error::InvalidParameter { .. } | Error::Config { .. } | Error::Format(_) | Error::PacketTooWide(_) => {
            HjStatus::InvalidParameter
        }
        Error::NonConvergence { .. } => HjStatus::NonConvergence,
        Error::TopologyMismatch(_) => HjStatus::Topology,
        Error::Io(_) => HjStatus::Io,
        _ => HjStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), HjStatus>) -> HjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HjStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside hjreact".into());
            HjStatus::Panic
        }
    }
}

fn fail(err: Error) -> HjStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, HjStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle".into());
        HjStatus::NullPointer
    })
}

unsafe fn deref_mut<'a, T>(p: *mut T) -> Result<&'a mut T, HjStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null pointer".into());
        HjStatus::NullPointer
    })
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length, or 0 if none.
#[no_mangle]
pub unsafe extern "C" fn hj_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hj_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Müller-Brown surface with energies multiplied by `energy_scale`
/// (1e-3 gives the standard scaled surface).
#[no_mangle]
pub unsafe extern "C" fn hj_model_new(energy_scale: f64, out: *mut *mut HjModel) -> HjStatus {
    guard(|| {
        let out = deref_mut(out)?;
        let model = PesModel::mueller_brown(energy_scale);
        model.validate().map_err(fail)?;
        *out = Box::into_raw(Box::new(HjModel(model)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hj_model_free(model: *mut HjModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn hj_model_energy(model: *const HjModel, x: f64, y: f64, out: *mut f64) -> HjStatus {
    guard(|| {
        let m = deref(model)?;
        *deref_mut(out)? = m.0.evaluate(Vec2::new(x, y));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hj_model_gradient(
    model: *const HjModel,
    x: f64,
    y: f64,
    out_gx: *mut f64,
    out_gy: *mut f64,
) -> HjStatus {
    guard(|| {
        let m = deref(model)?;
        let g = m.0.gradient(Vec2::new(x, y));
        *deref_mut(out_gx)? = g.x;
        *deref_mut(out_gy)? = g.y;
        Ok(())
    })
}

/// Stationary points from the default seed grid. Writes up to `cap` points
/// into `out` and the number found into `out_len`; returns
/// `HJ_STATUS_BUFFER_TOO_SMALL` if `cap` is insufficient.
#[no_mangle]
pub unsafe extern "C" fn hj_model_stationary_points(
    model: *const HjModel,
    out: *mut HjStationaryPoint,
    cap: usize,
    out_len: *mut usize,
) -> HjStatus {
    guard(|| {
        let m = deref(model)?;
        let len = deref_mut(out_len)?;
        let found = m.0.find_stationary_points(&default_seeds(), &NewtonSettings::default()).map_err(fail)?;
        *len = found.points.len();
        if found.points.len() > cap {
            set_error(format!("need room for {} points", found.points.len()));
            return Err(HjStatus::BufferTooSmall);
        }
        if cap > 0 && out.is_null() {
            return Err(HjStatus::NullPointer);
        }
        for (k, p) in found.points.iter().enumerate() {
            *out.add(k) = HjStationaryPoint {
                x: p.position.x,
                y: p.position.y,
                energy: p.energy,
                kind: match p.kind {
                    StationaryKind::Minimum => 0,
                    StationaryKind::Saddle => 1,
                    StationaryKind::Other => 2,
                },
                lambda1: p.hessian_eigenvalues.0,
                lambda2: p.hessian_eigenvalues.1,
            };
        }
        Ok(())
    })
}

/// Minimum-energy path from the reactant to the product minimum.
#[no_mangle]
pub unsafe extern "C" fn hj_path_new(model: *const HjModel, out: *mut *mut HjPath) -> HjStatus {
    guard(|| {
        let m = deref(model)?;
        let out = deref_mut(out)?;
        let path = build_full_path(&m.0, &DescentSettings::default()).map_err(fail)?;
        *out = Box::into_raw(Box::new(HjPath(path)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hj_path_free(path: *mut HjPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

#[no_mangle]
pub unsafe extern "C" fn hj_path_len(path: *const HjPath, out: *mut usize) -> HjStatus {
    guard(|| {
        *deref_mut(out)? = deref(path)?.0.points.len();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hj_path_point(path: *const HjPath, index: usize, out: *mut HjPathPoint) -> HjStatus {
    guard(|| {
        let p = deref(path)?;
        let out = deref_mut(out)?;
        let Some(q) = p.0.points.get(index) else {
            set_error(format!("index {index} out of range"));
            return Err(HjStatus::OutOfRange);
        };
        *out = HjPathPoint { s: q.s, x: q.position.x, y: q.position.y, energy: q.energy };
        Ok(())
    })
}

/// Gaussian packet of variance `sigma_sq` per axis at `(x0, y0)` with
/// momentum `(-p0, p0)`, on the standard box with `nx x ny` points.
#[no_mangle]
pub unsafe extern "C" fn hj_propagator_new(
    model: *const HjModel,
    nx: usize,
    ny: usize,
    dt: f64,
    x0: f64,
    y0: f64,
    sigma_sq: f64,
    p0: f64,
    out: *mut *mut HjPropagator,
) -> HjStatus {
    guard(|| {
        let m = deref(model)?;
        let out = deref_mut(out)?;
        let grid = GridSpec { dt, ..GridSpec::default().with_points(nx, ny) };
        grid.validate().map_err(fail)?;
        let field = initial_packet(&grid, Vec2::new(x0, y0), (sigma_sq, sigma_sq), Vec2::new(-p0, p0)).map_err(fail)?;
        let prop = Propagator::new(&m.0, field).map_err(fail)?;
        *out = Box::into_raw(Box::new(HjPropagator(prop)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hj_propagator_free(prop: *mut HjPropagator) {
    if !prop.is_null() {
        drop(Box::from_raw(prop));
    }
}

#[no_mangle]
pub unsafe extern "C" fn hj_propagator_step(prop: *mut HjPropagator, steps: usize) -> HjStatus {
    guard(|| {
        let p = deref_mut(prop)?;
        for _ in 0..steps {
            p.0.step().map_err(fail)?;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hj_propagator_time(prop: *const HjPropagator, out: *mut f64) -> HjStatus {
    guard(|| {
        *deref_mut(out)? = deref(prop)?.0.time();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn hj_propagator_norm(prop: *const HjPropagator, out: *mut f64) -> HjStatus {
    guard(|| {
        *deref_mut(out)? = deref(prop)?.0.snapshot().norm();
        Ok(())
    })
}

/// Probability in the products region above the default frontier line.
#[no_mangle]
pub unsafe extern "C" fn hj_propagator_restricted_norm(prop: *const HjPropagator, out: *mut f64) -> HjStatus {
    guard(|| {
        let p = deref(prop)?;
        *deref_mut(out)? = restricted_norm(&p.0.snapshot(), &FrontierLine::default());
        Ok(())
    })
}
