//! C ABI over `morphsim`.
//!
//! Designs and results are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`MsStatus`]; on failure the message is available from
//! [`ms_last_error_message`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use morphsim::analysis::{fit_bend_radius, helix_metrics, BendOrientation};
use morphsim::designs::{self, Design, Model};
use morphsim::material;
use morphsim::quadmesh::save_obj;
use morphsim::simulate::{simulate, Simulation};
use morphsim::solver::{SolverConfig, Termination};
use morphsim::Error;
use nalgebra::Vector2;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numerical = 5,
    Panic = 6,
}

/// Bending model selecting the target forms.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsModel {
    FiniteStrain = 0,
    PureBending = 1,
}

/// Why the solver stopped.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsTermination {
    Gradient = 0,
    Step = 1,
    MaxIters = 2,
}

/// Solver parameters. A negative `perturb_amplitude` selects the default
/// amplitude derived from the mesh pitch.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsSolverConfig {
    pub tau: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub k_max: u32,
    pub perturb_amplitude: f64,
    pub seed: u64,
}

/// Helix fitted to a strip's mid-line.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MsHelix {
    pub radius: f64,
    pub pitch: f64,
    pub handedness: i32,
    pub axis: [f64; 3],
    pub rms: f64,
}

/// Opaque design handle.
pub struct MsDesign(Design);

/// Opaque simulation result handle.
pub struct MsResult(Simulation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(MsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            _ if e.is_numerical() => MsStatus::Numerical,
            Error::Io(_) => MsStatus::Io,
            Error::Parse { .. } | Error::NonQuadFace { .. } | Error::Json(_) | Error::Schema(_) => {
                MsStatus::Parse
            }
            _ => MsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            MsStatus::Panic
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure(MsStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn design_ref<'a>(design: *const MsDesign) -> Result<&'a Design, Failure> {
    design.as_ref().map(|d| &d.0).ok_or_else(|| null("design"))
}

unsafe fn result_ref<'a>(result: *const MsResult) -> Result<&'a Simulation, Failure> {
    result.as_ref().map(|r| &r.0).ok_or_else(|| null("result"))
}

unsafe fn emit_design(out: *mut *mut MsDesign, design: Design) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(Box::into_raw(Box::new(MsDesign(design))));
    Ok(())
}

/// Last error message on this thread, or null if none. The string stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fills `out` with the default solver parameters.
///
/// # Safety
/// `out` must be null or point to writable memory for one `MsSolverConfig`.
#[no_mangle]
pub unsafe extern "C" fn ms_solver_config_default(out: *mut MsSolverConfig) -> MsStatus {
    guard(|| {
        let c = SolverConfig::default();
        write_out(
            out,
            MsSolverConfig {
                tau: c.tau,
                eps1: c.eps1,
                eps2: c.eps2,
                k_max: c.k_max.try_into().unwrap_or(u32::MAX),
                perturb_amplitude: c.perturb_amplitude.unwrap_or(-1.0),
                seed: c.seed,
            },
        )
    })
}

/// Strain difference produced by top-layer printing speed `v_top` (mm/min).
///
/// # Safety
/// `out` must be null or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn ms_strain_from_speed(v_top: f64, out: *mut f64) -> MsStatus {
    guard(|| write_out(out, material::strain_from_speed(v_top)?))
}

/// Small-strain bending radius `2t/(3Δε)`.
#[no_mangle]
pub extern "C" fn ms_timoshenko_radius(delta_eps: f64, thickness: f64) -> f64 {
    material::timoshenko_radius(delta_eps, thickness)
}

/// Rectangular strip with uniform strain difference along `(dir_x, dir_y)`.
///
/// # Safety
/// `out` must be null or point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ms_design_rect(
    length: f64,
    width: f64,
    thickness: f64,
    pitch: f64,
    delta_eps: f64,
    dir_x: f64,
    dir_y: f64,
    model: MsModel,
    out: *mut *mut MsDesign,
) -> MsStatus {
    guard(|| {
        let model = match model {
            MsModel::FiniteStrain => Model::FiniteStrain,
            MsModel::PureBending => Model::PureBending,
        };
        let d = designs::rect_design(
            length,
            width,
            thickness,
            pitch,
            delta_eps,
            Vector2::new(dir_x, dir_y),
            model,
        )?;
        emit_design(out, d)
    })
}

/// Square plate with four petals around a strain-free center.
///
/// # Safety
/// `out` must be null or point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ms_design_flower(
    total_side: f64,
    center_side: f64,
    thickness: f64,
    pitch: f64,
    delta_eps: f64,
    out: *mut *mut MsDesign,
) -> MsStatus {
    guard(|| {
        let d = designs::flower_design(total_side, center_side, thickness, pitch, delta_eps)?;
        emit_design(out, d)
    })
}

/// Strip printed at `gamma_deg` degrees to its long axis.
///
/// # Safety
/// `out` must be null or point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ms_design_grass(
    length: f64,
    width: f64,
    thickness: f64,
    pitch: f64,
    gamma_deg: f64,
    delta_eps: f64,
    out: *mut *mut MsDesign,
) -> MsStatus {
    guard(|| {
        let d = designs::grass_design(
            length,
            width,
            thickness,
            pitch,
            gamma_deg.to_radians(),
            delta_eps,
        )?;
        emit_design(out, d)
    })
}

/// Reads a design JSON file.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ms_design_load(path: *const c_char, out: *mut *mut MsDesign) -> MsStatus {
    guard(|| {
        let d = Design::load(&path_arg(path)?)?;
        emit_design(out, d)
    })
}

/// Writes a design JSON file.
///
/// # Safety
/// `design` must be null or a live handle; `path` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ms_design_save(design: *const MsDesign, path: *const c_char) -> MsStatus {
    guard(|| Ok(design_ref(design)?.save(&path_arg(path)?)?))
}

/// Number of faces in the design mesh, 0 for a null handle.
///
/// # Safety
/// `design` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_design_num_faces(design: *const MsDesign) -> usize {
    design.as_ref().map_or(0, |d| d.0.mesh.num_faces())
}

/// Number of vertices in the design mesh, 0 for a null handle.
///
/// # Safety
/// `design` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_design_num_vertices(design: *const MsDesign) -> usize {
    design.as_ref().map_or(0, |d| d.0.mesh.num_vertices())
}

/// Releases a design. Null is a no-op.
///
/// # Safety
/// `design` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_design_free(design: *mut MsDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Relaxes `design` to equilibrium. `config` may be null for defaults;
/// design-level overrides take precedence either way.
///
/// # Safety
/// `design` must be null or a live handle; `config` null or a valid
/// `MsSolverConfig`; `out` null or a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ms_simulate(
    design: *const MsDesign,
    config: *const MsSolverConfig,
    out: *mut *mut MsResult,
) -> MsStatus {
    guard(|| {
        let design = design_ref(design)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let base = match config.as_ref() {
            None => SolverConfig::default(),
            Some(c) => SolverConfig {
                tau: c.tau,
                eps1: c.eps1,
                eps2: c.eps2,
                k_max: c.k_max as usize,
                perturb_amplitude: (c.perturb_amplitude >= 0.0).then_some(c.perturb_amplitude),
                seed: c.seed,
            },
        };
        base.validate()?;
        let sim = simulate(design, &base)?;
        out.write(Box::into_raw(Box::new(MsResult(sim))));
        Ok(())
    })
}

/// Releases a result. Null is a no-op.
///
/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_result_free(result: *mut MsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of vertices in the converged mesh, 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_result_num_vertices(result: *const MsResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.mesh.num_vertices())
}

/// Copies converged positions as `x0 y0 z0 x1 ...` into `buf`, which must
/// hold at least `3 * ms_result_num_vertices` doubles.
///
/// # Safety
/// `result` must be null or a live handle; `buf` must be null or point to
/// `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_result_vertices(
    result: *const MsResult,
    buf: *mut f64,
    len: usize,
) -> MsStatus {
    guard(|| {
        let v = result_ref(result)?.mesh.vertices();
        if buf.is_null() {
            return Err(null("buffer"));
        }
        if len < 3 * v.len() {
            return Err(Failure(
                MsStatus::InvalidArgument,
                format!("buffer holds {len} doubles, need {}", 3 * v.len()),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, 3 * v.len());
        for (chunk, p) in out.chunks_exact_mut(3).zip(v) {
            chunk.copy_from_slice(p.as_slice());
        }
        Ok(())
    })
}

/// Solver iteration count, 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_result_iterations(result: *const MsResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.report.iterations)
}

/// Final `‖f‖²`, NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_result_final_energy(result: *const MsResult) -> f64 {
    result
        .as_ref()
        .map_or(f64::NAN, |r| r.0.report.final_energy())
}

/// Stopping reason.
///
/// # Safety
/// `result` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ms_result_termination(
    result: *const MsResult,
    out: *mut MsTermination,
) -> MsStatus {
    guard(|| {
        let t = match result_ref(result)?.report.termination {
            Termination::Gradient => MsTermination::Gradient,
            Termination::Step => MsTermination::Step,
            Termination::MaxIters => MsTermination::MaxIters,
        };
        write_out(out, t)
    })
}

/// Writes the converged mesh as OBJ.
///
/// # Safety
/// `result` must be null or a live handle; `path` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ms_result_save_obj(
    result: *const MsResult,
    path: *const c_char,
) -> MsStatus {
    guard(|| Ok(save_obj(&result_ref(result)?.mesh, &path_arg(path)?)?))
}

/// Radius of the circle fitted to the mid-line along `(dir_x, dir_y)`.
/// Infinite for a straight mid-line. `orientation` (optional) receives +1
/// when the top layer is concave, −1 when the bottom is, 0 when flat.
///
/// # Safety
/// `result` must be null or a live handle; `radius` null or writable;
/// `orientation` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ms_result_bend_radius(
    result: *const MsResult,
    dir_x: f64,
    dir_y: f64,
    radius: *mut f64,
    orientation: *mut i32,
) -> MsStatus {
    guard(|| {
        let fit = fit_bend_radius(&result_ref(result)?.mesh, Vector2::new(dir_x, dir_y))?;
        write_out(radius, fit.radius)?;
        if !orientation.is_null() {
            orientation.write(match fit.orientation {
                BendOrientation::TopConcave => 1,
                BendOrientation::BottomConcave => -1,
                BendOrientation::Flat => 0,
            });
        }
        Ok(())
    })
}

/// Helix fitted to the mid-line along `(dir_x, dir_y)`.
///
/// # Safety
/// `result` must be null or a live handle; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ms_result_helix(
    result: *const MsResult,
    dir_x: f64,
    dir_y: f64,
    out: *mut MsHelix,
) -> MsStatus {
    guard(|| {
        let h = helix_metrics(&result_ref(result)?.mesh, Vector2::new(dir_x, dir_y))?;
        write_out(
            out,
            MsHelix {
                radius: h.radius,
                pitch: h.pitch,
                handedness: h.handedness.into(),
                axis: h.axis,
                rms: h.rms,
            },
        )
    })
}
