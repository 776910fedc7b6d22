//! C ABI over the neckflow solver.
//!
//! Every entry point returns an [`NfStatus`]. On failure the message is kept in
//! a thread-local buffer readable through [`nf_last_error`]. Handles are opaque
//! and must be released with the matching `*_free` function.

use neckflow::asymptotics::{gamma_fn, k_const, theta, GapHessian, Regime};
use neckflow::geometry::GeometryConfig;
use neckflow::{Geometry, NeckError, Solution, SolveConfig, TriMesh};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numeric = 3,
    Capacity = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

pub struct NfGeometry(Geometry);
pub struct NfMesh(TriMesh);
pub struct NfSolution(Solution);

/// `u1`, `u2`, `flux1`, `flux2` are NaN for inclusions absent from the geometry.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NfSolutionSummary {
    pub p: f64,
    pub eta_final: f64,
    pub u1: f64,
    pub u2: f64,
    pub energy: f64,
    pub kkt_residual: f64,
    pub flux1: f64,
    pub flux2: f64,
    pub newton_iterations: usize,
    pub n_vertices: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn status_of(e: &NeckError) -> NfStatus {
    match e {
        NeckError::Domain(_) | NeckError::Config(_) | NeckError::UnsupportedBranch(_) => NfStatus::InvalidArgument,
        NeckError::Capacity { .. } => NfStatus::Capacity,
        NeckError::Io(_) => NfStatus::Io,
        NeckError::Numeric(_) | NeckError::Stagnation { .. } | NeckError::Accuracy(_) | NeckError::Fit(_) => {
            NfStatus::Numeric
        }
    }
}

struct Fail(NfStatus, String);

impl From<NeckError> for Fail {
    fn from(e: NeckError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(NfStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            NfStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NfStatus::Panic
        }
    }
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn nf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// The symmetric two-disc benchmark at scale `scale` and gap `eps`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_discs(scale: f64, eps: f64, out: *mut *mut NfGeometry) -> NfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let g = Geometry::symmetric_discs(scale, eps)?;
        *out = Box::into_raw(Box::new(NfGeometry(g)));
        Ok(())
    })
}

/// Builds a geometry from a TOML document.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_from_toml(toml: *const c_char, out: *mut *mut NfGeometry) -> NfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| Fail(NfStatus::InvalidArgument, format!("toml is not UTF-8: {e}")))?;
        let g = GeometryConfig::from_toml_str(text)?.build()?;
        *out = Box::into_raw(Box::new(NfGeometry(g)));
        Ok(())
    })
}

/// # Safety
/// `g` must be null or a handle from a geometry constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_free(g: *mut NfGeometry) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live geometry handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_eps(g: *const NfGeometry, out: *mut f64) -> NfStatus {
    guard(|| {
        *out_ptr(out, "out")? = in_ref(g, "geometry")?.0.eps;
        Ok(())
    })
}

/// # Safety
/// `g` must be a live geometry handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_mesh_generate(
    g: *const NfGeometry,
    target_h: f64,
    neck_layers: usize,
    out: *mut *mut NfMesh,
) -> NfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let g = in_ref(g, "geometry")?;
        let m = neckflow::mesh::generate(&g.0, target_h, neck_layers)?;
        *out = Box::into_raw(Box::new(NfMesh(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn nf_mesh_free(m: *mut NfMesh) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live mesh handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_mesh_counts(m: *const NfMesh, n_vertices: *mut usize, n_triangles: *mut usize) -> NfStatus {
    guard(|| {
        let m = in_ref(m, "mesh")?;
        *out_ptr(n_vertices, "n_vertices")? = m.0.vertices.len();
        *out_ptr(n_triangles, "n_triangles")? = m.0.triangles.len();
        Ok(())
    })
}

/// Solves with the default continuation schedule for `p`.
///
/// # Safety
/// `g` and `m` must be live handles, with `m` generated from `g`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_solve(
    g: *const NfGeometry,
    m: *const NfMesh,
    p: f64,
    out: *mut *mut NfSolution,
) -> NfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let g = in_ref(g, "geometry")?;
        let m = in_ref(m, "mesh")?;
        let sol = neckflow::solve(&m.0, &g.0, &SolveConfig::new(p))?;
        *out = Box::into_raw(Box::new(NfSolution(sol)));
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn nf_solution_free(s: *mut NfSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// # Safety
/// `s` must be a live solution handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_solution_summary(s: *const NfSolution, out: *mut NfSolutionSummary) -> NfStatus {
    guard(|| {
        let s = &in_ref(s, "solution")?.0;
        *out_ptr(out, "out")? = NfSolutionSummary {
            p: s.p,
            eta_final: s.eta_final,
            u1: s.u1.unwrap_or(f64::NAN),
            u2: s.u2.unwrap_or(f64::NAN),
            energy: s.energy,
            kkt_residual: s.kkt_residual,
            flux1: s.flux1.unwrap_or(f64::NAN),
            flux2: s.flux2.unwrap_or(f64::NAN),
            newton_iterations: s.newton_iterations,
            n_vertices: s.nodal_values.len(),
        };
        Ok(())
    })
}

/// Copies the nodal values into `buf`. `len_out` always receives the number of
/// vertices; pass a null `buf` to query it. Returns `BufferTooSmall` when
/// `cap` is short.
///
/// # Safety
/// `s` must be a live solution handle; `buf` must be null or point to `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn nf_solution_nodal_values(
    s: *const NfSolution,
    buf: *mut f64,
    cap: usize,
    len_out: *mut usize,
) -> NfStatus {
    guard(|| {
        let v = &in_ref(s, "solution")?.0.nodal_values;
        *out_ptr(len_out, "len_out")? = v.len();
        if buf.is_null() {
            return Ok(());
        }
        if cap < v.len() {
            return Err(Fail(
                NfStatus::BufferTooSmall,
                format!("buffer holds {cap} values, need {}", v.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, v.len()).copy_from_slice(v);
        Ok(())
    })
}

/// Blow-up factor for dimension `n`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_theta(eps: f64, p: f64, n: usize, out: *mut f64) -> NfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = theta(eps, &Regime::new(p, n)?)?;
        Ok(())
    })
}

/// Leading-order constant for the `(n-1)x(n-1)` row-major gap Hessian `hess`.
///
/// # Safety
/// `hess` must point to `(n-1)*(n-1)` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_k_const(p: f64, n: usize, hess: *const f64, out: *mut f64) -> NfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if hess.is_null() {
            return Err(null("hess"));
        }
        let regime = Regime::new(p, n)?;
        let d = n - 1;
        let flat = std::slice::from_raw_parts(hess, d * d);
        let rows: Vec<Vec<f64>> = flat.chunks(d).map(|r| r.to_vec()).collect();
        *out = k_const(&GapHessian::from_rows(&rows)?, &regime)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nf_gamma(z: f64, out: *mut f64) -> NfStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = gamma_fn(z)?;
        Ok(())
    })
}
