//! C ABI over the giant-atoms library.
//!
//! Every fallible function returns a `GA_*` status code and writes its
//! result through an out-pointer. After a failure, `ga_last_error` gives a
//! message for the calling thread. Layouts and trajectories are opaque
//! handles owned by the caller and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use giant_atoms::delay::{dde_evolve, AmplitudeTrajectory};
use giant_atoms::model::{
    classify_topology, equidistant_layout, CouplingPoint, Layout, LayoutDocument, Topology, Waveguide,
};
use giant_atoms::multiatom::two_atom_coefficients;
use giant_atoms::spectral::{lamb_shift, lamb_shift_equidistant, relaxation_rate, relaxation_rate_equidistant};
use giant_atoms::Error;

pub const GA_OK: c_int = 0;
pub const GA_ERR_NULL: c_int = 1;
pub const GA_ERR_INVALID: c_int = 2;
pub const GA_ERR_NUMERICAL: c_int = 3;
pub const GA_ERR_IO: c_int = 4;
pub const GA_ERR_PANIC: c_int = 5;

pub const GA_TOPOLOGY_SMALL: c_int = 0;
pub const GA_TOPOLOGY_SEPARATE: c_int = 1;
pub const GA_TOPOLOGY_BRAIDED: c_int = 2;
pub const GA_TOPOLOGY_NESTED: c_int = 3;
pub const GA_TOPOLOGY_UNCLASSIFIED: c_int = 4;

/// Opaque set of coupling points.
pub struct GaLayout(Layout);

/// Opaque single-excitation trajectory.
pub struct GaTrajectory(AmplitudeTrajectory);

/// Group velocity `v` and single-point decay rate `gamma`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GaWaveguide {
    pub v: f64,
    pub gamma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GaTwoAtom {
    pub g: f64,
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub gamma_coll: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(c_int, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Convergence(_) => GA_ERR_NUMERICAL,
            Error::Io(_) => GA_ERR_IO,
            _ => GA_ERR_INVALID,
        };
        Failure(code, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(GA_ERR_NULL, format!("{what} is NULL"))
}

/// Run `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> c_int {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GA_OK,
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            GA_ERR_PANIC
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn waveguide(w: GaWaveguide) -> Result<Waveguide, Failure> {
    Ok(Waveguide::with_unit_rate(w.v, w.gamma)?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ga_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ga_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ga_layout_equidistant(
    n: usize,
    spacing: f64,
    strength: f64,
    out: *mut *mut GaLayout,
) -> c_int {
    guard(|| {
        let layout = equidistant_layout(n, spacing, strength)?;
        store(out, Box::into_raw(Box::new(GaLayout(layout))), "out")
    })
}

/// Layout from `len` positions and strengths.
///
/// # Safety
/// `positions` and `strengths` must each point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn ga_layout_from_points(
    positions: *const f64,
    strengths: *const f64,
    len: usize,
    out: *mut *mut GaLayout,
) -> c_int {
    guard(|| {
        if positions.is_null() || strengths.is_null() {
            return Err(null("positions or strengths"));
        }
        let x = std::slice::from_raw_parts(positions, len);
        let s = std::slice::from_raw_parts(strengths, len);
        let points = x.iter().zip(s).map(|(x, s)| CouplingPoint::new(*x, *s)).collect();
        let layout = Layout::new("atom", points)?;
        store(out, Box::into_raw(Box::new(GaLayout(layout))), "out")
    })
}

/// Load a `.toml` or `.json` layout document.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ga_layout_load(path: *const c_char, out: *mut *mut GaLayout) -> c_int {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| Failure(GA_ERR_INVALID, "path is not UTF-8".into()))?;
        let layout = LayoutDocument::load(path)?.layout()?;
        store(out, Box::into_raw(Box::new(GaLayout(layout))), "out")
    })
}

/// # Safety
/// `layout` must come from a `ga_layout_*` constructor and not be used
/// afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ga_layout_free(layout: *mut GaLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// Number of coupling points, or 0 for NULL.
///
/// # Safety
/// `layout` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ga_layout_len(layout: *const GaLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.0.len())
}

/// # Safety
/// `layout` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ga_relaxation_rate(
    layout: *const GaLayout,
    wg: GaWaveguide,
    omega: f64,
    out: *mut f64,
) -> c_int {
    guard(|| {
        let l = borrow(layout, "layout")?;
        store(out, relaxation_rate(&l.0, &waveguide(wg)?, 0, omega), "out")
    })
}

/// # Safety
/// `layout` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ga_lamb_shift(layout: *const GaLayout, wg: GaWaveguide, omega: f64, out: *mut f64) -> c_int {
    guard(|| {
        let l = borrow(layout, "layout")?;
        store(out, lamb_shift(&l.0, &waveguide(wg)?, 0, omega), "out")
    })
}

/// Closed-form rate of `n` equidistant unit points at neighbour phase `phi`.
#[no_mangle]
pub extern "C" fn ga_relaxation_rate_equidistant(n: usize, phi: f64, gamma: f64) -> f64 {
    relaxation_rate_equidistant(n, phi, gamma)
}

#[no_mangle]
pub extern "C" fn ga_lamb_shift_equidistant(n: usize, phi: f64, gamma: f64) -> f64 {
    lamb_shift_equidistant(n, phi, gamma)
}

/// # Safety
/// `a`, `b` must be live handles; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ga_two_atom_coefficients(
    a: *const GaLayout,
    b: *const GaLayout,
    wg: GaWaveguide,
    omega: f64,
    out: *mut GaTwoAtom,
) -> c_int {
    guard(|| {
        let (a, b) = (borrow(a, "a")?, borrow(b, "b")?);
        let c = two_atom_coefficients(&a.0, &b.0, &waveguide(wg)?, omega)?;
        store(out, GaTwoAtom { g: c.g, gamma_a: c.gamma_a, gamma_b: c.gamma_b, gamma_coll: c.gamma_coll }, "out")
    })
}

/// Writes one of the `GA_TOPOLOGY_*` codes.
///
/// # Safety
/// `a`, `b` must be live handles; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ga_classify_topology(a: *const GaLayout, b: *const GaLayout, out: *mut c_int) -> c_int {
    guard(|| {
        let (a, b) = (borrow(a, "a")?, borrow(b, "b")?);
        let code = match classify_topology(&a.0, &b.0)? {
            Topology::Small => GA_TOPOLOGY_SMALL,
            Topology::Separate => GA_TOPOLOGY_SEPARATE,
            Topology::Braided => GA_TOPOLOGY_BRAIDED,
            Topology::Nested => GA_TOPOLOGY_NESTED,
            Topology::Unclassified => GA_TOPOLOGY_UNCLASSIFIED,
        };
        store(out, code, "out")
    })
}

/// Delay-equation evolution from the excited atom.
///
/// # Safety
/// `layout` must be a live handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ga_dde_evolve(
    layout: *const GaLayout,
    wg: GaWaveguide,
    omega_a: f64,
    t_end: f64,
    dt: f64,
    out: *mut *mut GaTrajectory,
) -> c_int {
    guard(|| {
        let l = borrow(layout, "layout")?;
        let traj = dde_evolve(&l.0, &waveguide(wg)?, omega_a, t_end, dt)?;
        store(out, Box::into_raw(Box::new(GaTrajectory(traj))), "out")
    })
}

/// Sample count, or 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ga_trajectory_len(traj: *const GaTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.times.len())
}

/// Copy the samples into caller buffers of at least `ga_trajectory_len`
/// entries. Any buffer may be NULL to skip it.
///
/// # Safety
/// `traj` must be a live handle; non-NULL buffers must hold `capacity`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ga_trajectory_copy(
    traj: *const GaTrajectory,
    times: *mut f64,
    re: *mut f64,
    im: *mut f64,
    energy: *mut f64,
    capacity: usize,
) -> c_int {
    guard(|| {
        let t = &borrow(traj, "traj")?.0;
        let n = t.times.len();
        if capacity < n {
            return Err(Failure(GA_ERR_INVALID, format!("buffers hold {capacity} samples, need {n}")));
        }
        let fill = |dst: *mut f64, src: &mut dyn Iterator<Item = f64>| {
            if !dst.is_null() {
                for (i, v) in src.enumerate() {
                    dst.add(i).write(v);
                }
            }
        };
        fill(times, &mut t.times.iter().copied());
        fill(re, &mut t.amplitude.iter().map(|c| c.re));
        fill(im, &mut t.amplitude.iter().map(|c| c.im));
        fill(energy, &mut t.energy.iter().copied());
        Ok(())
    })
}

/// # Safety
/// `traj` must come from `ga_dde_evolve` and not be used afterwards. NULL
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn ga_trajectory_free(traj: *mut GaTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}
