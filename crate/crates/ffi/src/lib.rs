//! C interface to `conformal-bt`.
//!
//! Systems, maps and reductions are opaque heap handles released with the
//! matching `*_free` function. Every fallible call returns a [`CbtStatus`];
//! on failure a message is available from [`cbt_last_error_message`] on the
//! same thread. Matrices cross the boundary as row-major arrays of
//! [`CbtComplex`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use conformal_bt::analysis::{self, ErrorReport};
use conformal_bt::balancing::{self, ReductionResult};
use conformal_bt::benchmarks::{BenchmarkKind, BenchmarkSpec};
use conformal_bt::gramians::GramianMethod;
use conformal_bt::io::{self, ModelFile, ModelMetadata};
use conformal_bt::quadrature::QuadratureConfig;
use conformal_bt::{CMat, ConformalMap, Error, ErrorClass, JoukowskiMap, LtiSystem, MobiusMap, C64};

/// Status codes. Nonzero values agree with the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbtStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    Dimension = 3,
    Numerical = 4,
    Convergence = 5,
    Io = 6,
    Format = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbtComplex {
    pub re: f64,
    pub im: f64,
}

impl From<CbtComplex> for C64 {
    fn from(z: CbtComplex) -> Self {
        C64::new(z.re, z.im)
    }
}

impl From<C64> for CbtComplex {
    fn from(z: C64) -> Self {
        CbtComplex { re: z.re, im: z.im }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbtBenchmark {
    Heat = 0,
    Schrodinger = 1,
    Wave = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbtMethod {
    /// Lyapunov for Möbius maps, quadrature otherwise.
    Auto = 0,
    Lyapunov = 1,
    Quadrature = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbtMatrix {
    A = 0,
    B = 1,
    C = 2,
}

/// Quadrature tolerances; see [`cbt_quadrature_defaults`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbtQuadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

/// Scalar summary of an error report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbtErrorSummary {
    pub h2abar_error: f64,
    pub h2abar_fom_norm: f64,
    pub bound: f64,
    pub epsilon: f64,
    pub poles_inside: bool,
    pub min_pole_margin: f64,
}

pub struct CbtSystem(LtiSystem);
pub struct CbtMap(ConformalMap);
pub struct CbtReduction(ReductionResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> CbtStatus {
    match err.class() {
        ErrorClass::Validation => CbtStatus::Validation,
        ErrorClass::Dimension => CbtStatus::Dimension,
        ErrorClass::Numerical => CbtStatus::Numerical,
        ErrorClass::Convergence => CbtStatus::Convergence,
        ErrorClass::Io => CbtStatus::Io,
        ErrorClass::Format => CbtStatus::Format,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn guard(f: impl FnOnce() -> Outcome) -> CbtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CbtStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            CbtStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            CbtStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> std::result::Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> std::result::Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn path_arg<'a>(p: *const c_char) -> std::result::Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))?;
    Ok(Path::new(s))
}

unsafe fn read_matrix(
    p: *const CbtComplex,
    rows: usize,
    cols: usize,
    what: &'static str,
) -> std::result::Result<CMat, Failure> {
    if rows * cols == 0 {
        return Ok(CMat::zeros(rows, cols));
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    let data = std::slice::from_raw_parts(p, rows * cols);
    Ok(CMat::from_fn(rows, cols, |i, j| data[i * cols + j].into()))
}

/// Copies `m` row-major into `buf` when it is large enough; `len` receives
/// the required entry count either way.
unsafe fn write_matrix(m: &CMat, buf: *mut CbtComplex, cap: usize, len: *mut usize) -> Outcome {
    let need = m.nrows() * m.ncols();
    *out(len, "len")? = need;
    if buf.is_null() {
        return Ok(());
    }
    if cap < need {
        return Err(Error::DimensionMismatch(format!("buffer holds {cap} entries, {need} needed")).into());
    }
    let dst = std::slice::from_raw_parts_mut(buf, need);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dst[i * m.ncols() + j] = m[(i, j)].into();
        }
    }
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

fn quad_config(q: *const CbtQuadrature) -> conformal_bt::Result<QuadratureConfig> {
    let cfg = match unsafe { q.as_ref() } {
        None => QuadratureConfig::default(),
        Some(q) => {
            QuadratureConfig::default().with_tolerances(q.abs_tol, q.rel_tol).with_max_subdivisions(q.max_subdivisions)
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_method(method: CbtMethod, map: &ConformalMap) -> GramianMethod {
    match method {
        CbtMethod::Auto if map.as_mobius().is_some() => GramianMethod::Lyapunov,
        CbtMethod::Auto | CbtMethod::Quadrature => GramianMethod::Quadrature,
        CbtMethod::Lyapunov => GramianMethod::Lyapunov,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cbt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cbt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn cbt_quadrature_defaults() -> CbtQuadrature {
    let d = QuadratureConfig::default();
    CbtQuadrature { abs_tol: d.abs_tol, rel_tol: d.rel_tol, max_subdivisions: d.max_subdivisions }
}

/// Builds a system from row-major `a` (n×n), `b` (n×m) and `c` (q×n).
///
/// # Safety
/// Each array must hold the stated number of entries; `out_sys` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_system_new(
    n: usize,
    m: usize,
    q: usize,
    a: *const CbtComplex,
    b: *const CbtComplex,
    c: *const CbtComplex,
    out_sys: *mut *mut CbtSystem,
) -> CbtStatus {
    guard(|| {
        let slot = out(out_sys, "out_sys")?;
        let sys = LtiSystem::new(read_matrix(a, n, n, "a")?, read_matrix(b, n, m, "b")?, read_matrix(c, q, n, "c")?)?;
        *slot = boxed(CbtSystem(sys));
        Ok(())
    })
}

/// Finite-difference benchmark of order `n`.
///
/// # Safety
/// `out_sys` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_system_benchmark(kind: CbtBenchmark, n: usize, out_sys: *mut *mut CbtSystem) -> CbtStatus {
    guard(|| {
        let slot = out(out_sys, "out_sys")?;
        let kind = match kind {
            CbtBenchmark::Heat => BenchmarkKind::Heat,
            CbtBenchmark::Schrodinger => BenchmarkKind::Schrodinger,
            CbtBenchmark::Wave => BenchmarkKind::Wave,
        };
        *slot = boxed(CbtSystem(BenchmarkSpec::new(kind, n)?.build()?));
        Ok(())
    })
}

/// Reads a model file as written by the command-line tool.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_sys` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_system_load(path: *const c_char, out_sys: *mut *mut CbtSystem) -> CbtStatus {
    guard(|| {
        let slot = out(out_sys, "out_sys")?;
        let (sys, _) = io::read_model(path_arg(path)?)?;
        *slot = boxed(CbtSystem(sys));
        Ok(())
    })
}

/// # Safety
/// `sys` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cbt_system_save(sys: *const CbtSystem, path: *const c_char) -> CbtStatus {
    guard(|| {
        let sys = deref(sys, "sys")?;
        let file = ModelFile::from_system(&sys.0, ModelMetadata::default());
        io::write_json(path_arg(path)?, &file)?;
        Ok(())
    })
}

/// # Safety
/// `sys` must be a live handle; null output pointers are skipped.
#[no_mangle]
pub unsafe extern "C" fn cbt_system_dims(
    sys: *const CbtSystem,
    n: *mut usize,
    m: *mut usize,
    q: *mut usize,
) -> CbtStatus {
    guard(|| {
        let sys = &deref(sys, "sys")?.0;
        for (p, v) in [(n, sys.order()), (m, sys.inputs()), (q, sys.outputs())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies one system matrix row-major into `buf` (capacity `cap`
/// entries). `len` receives the entry count; pass a null `buf` to query it.
///
/// # Safety
/// `sys` must be a live handle, `buf` null or valid for `cap` entries.
#[no_mangle]
pub unsafe extern "C" fn cbt_system_matrix(
    sys: *const CbtSystem,
    which: CbtMatrix,
    buf: *mut CbtComplex,
    cap: usize,
    len: *mut usize,
) -> CbtStatus {
    guard(|| {
        let sys = &deref(sys, "sys")?.0;
        let m = match which {
            CbtMatrix::A => sys.a(),
            CbtMatrix::B => sys.b(),
            CbtMatrix::C => sys.c(),
        };
        write_matrix(m, buf, cap, len)
    })
}

/// Evaluates `G(z)` (q×m, row-major).
///
/// # Safety
/// As for [`cbt_system_matrix`].
#[no_mangle]
pub unsafe extern "C" fn cbt_system_transfer(
    sys: *const CbtSystem,
    z: CbtComplex,
    buf: *mut CbtComplex,
    cap: usize,
    len: *mut usize,
) -> CbtStatus {
    guard(|| {
        let g = deref(sys, "sys")?.0.transfer_eval(z.into())?;
        write_matrix(&g, buf, cap, len)
    })
}

/// Eigenvalues of `A`; `len` receives `n`.
///
/// # Safety
/// As for [`cbt_system_matrix`].
#[no_mangle]
pub unsafe extern "C" fn cbt_system_poles(
    sys: *const CbtSystem,
    buf: *mut CbtComplex,
    cap: usize,
    len: *mut usize,
) -> CbtStatus {
    guard(|| {
        let poles = deref(sys, "sys")?.0.poles()?;
        write_matrix(&CMat::from_row_slice(1, poles.len(), &poles), buf, cap, len)
    })
}

/// # Safety
/// `sys` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cbt_system_free(sys: *mut CbtSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

unsafe fn new_map(out_map: *mut *mut CbtMap, make: impl FnOnce() -> conformal_bt::Result<ConformalMap>) -> CbtStatus {
    guard(|| {
        let slot = out(out_map, "out_map")?;
        *slot = boxed(CbtMap(make()?));
        Ok(())
    })
}

/// `m(s) = (αs + β)/(γs + δ)`.
///
/// # Safety
/// `out_map` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_map_mobius(
    alpha: CbtComplex,
    beta: CbtComplex,
    gamma: CbtComplex,
    delta: CbtComplex,
    out_map: *mut *mut CbtMap,
) -> CbtStatus {
    new_map(out_map, || Ok(MobiusMap::new(alpha.into(), beta.into(), gamma.into(), delta.into())?.into()))
}

/// The identity map, giving classical balanced truncation.
///
/// # Safety
/// `out_map` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_map_identity(out_map: *mut *mut CbtMap) -> CbtStatus {
    new_map(out_map, || Ok(ConformalMap::identity()))
}

/// `s ↦ −is`, onto the upper half-plane.
///
/// # Safety
/// `out_map` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_map_rotation(out_map: *mut *mut CbtMap) -> CbtStatus {
    new_map(out_map, || Ok(MobiusMap::clockwise_rotation().into()))
}

/// Onto the open disk of the given center and radius.
///
/// # Safety
/// `out_map` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_map_disk(center: CbtComplex, radius: f64, out_map: *mut *mut CbtMap) -> CbtStatus {
    new_map(out_map, || Ok(MobiusMap::disk(center.into(), radius)?.into()))
}

/// Onto the Bernstein ellipse with parameter `r > 1`, scaled and rotated
/// by `m` and centered at `c`.
///
/// # Safety
/// `out_map` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_map_joukowski(
    c: CbtComplex,
    m: CbtComplex,
    r: f64,
    out_map: *mut *mut CbtMap,
) -> CbtStatus {
    new_map(out_map, || Ok(JoukowskiMap::new(c.into(), m.into(), r)?.into()))
}

/// # Safety
/// `map` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_map_eval(map: *const CbtMap, s: CbtComplex, out_value: *mut CbtComplex) -> CbtStatus {
    guard(|| {
        let v = deref(map, "map")?.0.eval(s.into())?;
        *out(out_value, "out_value")? = v.into();
        Ok(())
    })
}

/// # Safety
/// `map` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cbt_map_free(map: *mut CbtMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Conformal balanced truncation of `sys` to order `r`. `quad` may be null
/// for default tolerances. Near-equal singular values at the cut fail
/// unless `allow_ties` is set.
///
/// # Safety
/// Handles must be live; `out_red` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_reduce(
    sys: *const CbtSystem,
    map: *const CbtMap,
    r: usize,
    method: CbtMethod,
    quad: *const CbtQuadrature,
    allow_ties: bool,
    out_red: *mut *mut CbtReduction,
) -> CbtStatus {
    guard(|| {
        let slot = out(out_red, "out_red")?;
        let sys = &deref(sys, "sys")?.0;
        let map = &deref(map, "map")?.0;
        let cfg = quad_config(quad)?;
        let method = resolve_method(method, map);
        if r == 0 || r > sys.order() {
            return Err(Error::InvalidArgument(format!("reduced order {r} outside 1..={}", sys.order())).into());
        }
        let grams = conformal_bt::gramians::gramians(sys, map, method, &cfg)?;
        let ties = if allow_ties { balancing::TieHandling::Allow } else { balancing::TieHandling::Reject };
        *slot = boxed(CbtReduction(balancing::conformal_bt_with_gramians(sys, &grams, r, ties)?));
        Ok(())
    })
}

/// New system handle holding the reduced model.
///
/// # Safety
/// `red` must be a live handle and `out_sys` valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_reduction_rom(red: *const CbtReduction, out_sys: *mut *mut CbtSystem) -> CbtStatus {
    guard(|| {
        let rom = deref(red, "red")?.0.rom.clone();
        *out(out_sys, "out_sys")? = boxed(CbtSystem(rom));
        Ok(())
    })
}

/// Hankel singular values, descending. `len` receives their count; pass a
/// null `buf` to query it.
///
/// # Safety
/// `red` must be a live handle, `buf` null or valid for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn cbt_reduction_hsv(
    red: *const CbtReduction,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> CbtStatus {
    guard(|| {
        let hsv = &deref(red, "red")?.0.hsv;
        *out(len, "len")? = hsv.len();
        if buf.is_null() {
            return Ok(());
        }
        if cap < hsv.len() {
            return Err(Error::DimensionMismatch(format!("buffer holds {cap} values, {} needed", hsv.len())).into());
        }
        std::slice::from_raw_parts_mut(buf, hsv.len()).copy_from_slice(hsv);
        Ok(())
    })
}

/// # Safety
/// `red` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cbt_reduction_free(red: *mut CbtReduction) {
    if !red.is_null() {
        drop(Box::from_raw(red));
    }
}

/// `‖G‖` in the norm pulled back through `map`.
///
/// # Safety
/// Handles must be live; `out_norm` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_h2abar_norm(
    sys: *const CbtSystem,
    map: *const CbtMap,
    quad: *const CbtQuadrature,
    out_norm: *mut f64,
) -> CbtStatus {
    guard(|| {
        let slot = out(out_norm, "out_norm")?;
        *slot = analysis::h2abar_norm(&deref(sys, "sys")?.0, &deref(map, "map")?.0, &quad_config(quad)?)?;
        Ok(())
    })
}

/// Error norm, a-priori bound and pole placement of `rom` against `fom`.
///
/// # Safety
/// Handles must be live; `out_summary` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cbt_error_summary(
    fom: *const CbtSystem,
    rom: *const CbtSystem,
    map: *const CbtMap,
    method: CbtMethod,
    quad: *const CbtQuadrature,
    out_summary: *mut CbtErrorSummary,
) -> CbtStatus {
    guard(|| {
        let slot = out(out_summary, "out_summary")?;
        let map = &deref(map, "map")?.0;
        let report: ErrorReport = analysis::error_report(
            &deref(fom, "fom")?.0,
            &deref(rom, "rom")?.0,
            map,
            resolve_method(method, map),
            &quad_config(quad)?,
        )?;
        *slot = CbtErrorSummary {
            h2abar_error: report.h2abar_error,
            h2abar_fom_norm: report.h2abar_fom_norm,
            bound: report.bound,
            epsilon: report.epsilon,
            poles_inside: report.all_poles_inside(),
            min_pole_margin: report.pole_verdicts.iter().map(|v| v.margin).fold(f64::INFINITY, f64::min),
        };
        Ok(())
    })
}
