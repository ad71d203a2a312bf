//! C ABI for the annulus toolkit: opaque handles, status codes, and a small
//! surface covering grid construction, equilibrium classification, growth
//! rates and config-driven simulation runs.
//!
//! Every function returns an [`AnnStatus`]; on failure the thread-local
//! message retrieved by [`ann_last_error_message`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::sync::Arc;

use annulus::eigensolver;
use annulus::equilibrium::{
    make_equilibrium, make_potential, ExpProfile, HydrostaticEquilibrium, IdentityProfile,
    LinearProfile, PhysicsParams, PotentialKind, Profile, SlipCoefficient, Stability,
};
use annulus::spectral::AnnulusGrid;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: impl std::fmt::Display) {
    let s = CString::new(format!("{msg}")).unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AnnStatus {
    Ok = 0,
    NullArgument = 1,
    Validation = 2,
    Numeric = 3,
}

/// Stability classes mirrored for C callers.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AnnStability {
    Stable = 0,
    Unstable = 1,
    Indeterminate = 2,
}

/// Gravitational potential kinds.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AnnPotential {
    LogRadial = 0,
    UniformVertical = 1,
    RadialLinear = 2,
}

/// Density profile kinds R(z).
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AnnProfile {
    /// R(z) = -gamma z + beta.
    Linear = 0,
    /// R(z) = exp(rate z).
    Exp = 1,
    /// R(z) = z.
    Identity = 2,
}

/// Opaque grid handle.
pub struct AnnGrid {
    grid: Arc<AnnulusGrid>,
}

/// Opaque equilibrium handle, bundling the physics parameters.
pub struct AnnEquilibrium {
    eq: Arc<HydrostaticEquilibrium>,
    params: PhysicsParams,
}

fn status_of(err: &annulus::Error) -> AnnStatus {
    use annulus::Error as E;
    match err {
        E::Domain(_) | E::Size(_) | E::Arg(_) | E::Validation { .. } | E::Parse { .. }
        | E::Range { .. } | E::Variant(_) => AnnStatus::Validation,
        _ => AnnStatus::Numeric,
    }
}

/// Copy the last error message into `buf` (NUL-terminated, truncated to
/// `cap`); returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be NULL with `cap = 0`.
#[no_mangle]
pub unsafe extern "C" fn ann_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            // Ensure termination even when truncated.
            *buf.add(n - 1) = 0;
        }
        bytes.len() - 1
    })
}

/// Static library version string.
#[no_mangle]
pub extern "C" fn ann_version() -> *const c_char {
    concat!("annulus ", env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Create a grid with inner radius `a`, outer radius `b`, `nr` radial nodes
/// and `ntheta` azimuthal nodes.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives an owned handle that
/// must be released with [`ann_grid_free`].
#[no_mangle]
pub unsafe extern "C" fn ann_grid_new(
    a: f64,
    b: f64,
    nr: u32,
    ntheta: u32,
    out: *mut *mut AnnGrid,
) -> AnnStatus {
    if out.is_null() {
        set_error("out pointer is NULL");
        return AnnStatus::NullArgument;
    }
    match AnnulusGrid::new(a, b, nr as usize, ntheta as usize) {
        Ok(grid) => {
            *out = Box::into_raw(Box::new(AnnGrid { grid }));
            AnnStatus::Ok
        }
        Err(e) => {
            set_error(&e);
            status_of(&e)
        }
    }
}

/// # Safety
/// `grid` must be a handle from [`ann_grid_new`], not yet freed; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn ann_grid_free(grid: *mut AnnGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Build a hydrostatic equilibrium rho_s = R(f) on the grid together with
/// physics parameters (viscosity `nu`, reference density `rho_star`,
/// constant slip coefficient `alpha`). `p1` is gamma (Linear) or rate (Exp);
/// `p2` is beta (Linear).
///
/// # Safety
/// `grid` must be a live handle; `out` must be valid and receives an owned
/// handle to release with [`ann_equilibrium_free`].
#[no_mangle]
pub unsafe extern "C" fn ann_equilibrium_new(
    grid: *const AnnGrid,
    potential: AnnPotential,
    g: f64,
    profile: AnnProfile,
    p1: f64,
    p2: f64,
    nu: f64,
    rho_star: f64,
    alpha: f64,
    out: *mut *mut AnnEquilibrium,
) -> AnnStatus {
    if grid.is_null() || out.is_null() {
        set_error("NULL handle");
        return AnnStatus::NullArgument;
    }
    let grid = &(*grid).grid;
    let kind = match potential {
        AnnPotential::LogRadial => PotentialKind::LogRadial { g },
        AnnPotential::UniformVertical => PotentialKind::UniformVertical { g },
        AnnPotential::RadialLinear => PotentialKind::RadialLinear { g },
    };
    let profile: Arc<dyn Profile> = match profile {
        AnnProfile::Linear => Arc::new(LinearProfile { gamma: p1, beta: p2 }),
        AnnProfile::Exp => Arc::new(ExpProfile { rate: p1 }),
        AnnProfile::Identity => Arc::new(IdentityProfile),
    };
    let build = || -> annulus::Result<AnnEquilibrium> {
        let pot = make_potential(kind.clone(), grid)?;
        let eq = make_equilibrium(pot, profile.clone())?;
        let params = PhysicsParams::new(nu, rho_star, SlipCoefficient::Constant(alpha))?;
        params.validate_on(grid)?;
        Ok(AnnEquilibrium { eq: Arc::new(eq), params })
    };
    match build() {
        Ok(h) => {
            *out = Box::into_raw(Box::new(h));
            AnnStatus::Ok
        }
        Err(e) => {
            set_error(&e);
            status_of(&e)
        }
    }
}

/// # Safety
/// `eq` must be a handle from [`ann_equilibrium_new`], not yet freed; NULL is
/// a no-op.
#[no_mangle]
pub unsafe extern "C" fn ann_equilibrium_free(eq: *mut AnnEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// Classify the equilibrium by the sign of h. `out_h` receives h0 for stable
/// profiles and max h for unstable ones.
///
/// # Safety
/// `eq` must be live; out pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn ann_classify(
    eq: *const AnnEquilibrium,
    out_class: *mut AnnStability,
    out_h: *mut f64,
) -> AnnStatus {
    if eq.is_null() {
        set_error("NULL handle");
        return AnnStatus::NullArgument;
    }
    let handle = &*eq;
    let (class, h) = match handle.eq.stability {
        Stability::Stable { h0 } => (AnnStability::Stable, h0),
        Stability::Unstable { h_max, .. } => (AnnStability::Unstable, h_max),
        Stability::Indeterminate => (AnnStability::Indeterminate, 0.0),
    };
    if !out_class.is_null() {
        *out_class = class;
    }
    if !out_h.is_null() {
        *out_h = h;
    }
    AnnStatus::Ok
}

/// Rayleigh-Taylor growth rate over azimuthal modes 0..=m_max.
/// `out_found` is 0 for spectrally stable configurations; otherwise
/// `out_lambda` and `out_mode` describe the dominant growth mode.
///
/// # Safety
/// `eq` must be live; out pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn ann_growth_rate(
    eq: *const AnnEquilibrium,
    m_max: u32,
    out_found: *mut i32,
    out_lambda: *mut f64,
    out_mode: *mut i64,
) -> AnnStatus {
    if eq.is_null() {
        set_error("NULL handle");
        return AnnStatus::NullArgument;
    }
    let handle = &*eq;
    let modes: Vec<usize> = (0..=m_max as usize).collect();
    match eigensolver::full_spectrum_check(&handle.eq, &handle.params, &modes) {
        Ok(scan) => {
            if !out_found.is_null() {
                *out_found = scan.lambda.is_some() as i32;
            }
            if !out_lambda.is_null() {
                *out_lambda = scan.lambda.unwrap_or(0.0);
            }
            if !out_mode.is_null() {
                *out_mode = scan.dominant_mode.unwrap_or(-1);
            }
            AnnStatus::Ok
        }
        Err(e) => {
            set_error(&e);
            status_of(&e)
        }
    }
}

/// The parametrized infimum alpha(s) for one azimuthal mode.
///
/// # Safety
/// `eq` must be live; `out_alpha` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ann_alpha_of_s(
    eq: *const AnnEquilibrium,
    m: u32,
    s: f64,
    out_alpha: *mut f64,
) -> AnnStatus {
    if eq.is_null() || out_alpha.is_null() {
        set_error("NULL handle");
        return AnnStatus::NullArgument;
    }
    let handle = &*eq;
    let compute = || -> annulus::Result<f64> {
        let forms = eigensolver::assemble_forms(&handle.eq, &handle.params, m as usize)?;
        eigensolver::alpha_of_s(&forms, s)
    };
    match compute() {
        Ok(a) => {
            *out_alpha = a;
            AnnStatus::Ok
        }
        Err(e) => {
            set_error(&e);
            status_of(&e)
        }
    }
}

/// Run a full simulation described by a config file, writing the run
/// directory under `out_dir` exactly like the `simulate` subcommand.
///
/// # Safety
/// Both arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ann_run_simulation(
    config_path: *const c_char,
    out_dir: *const c_char,
) -> AnnStatus {
    if config_path.is_null() || out_dir.is_null() {
        set_error("NULL path");
        return AnnStatus::NullArgument;
    }
    let cfg_path = match CStr::from_ptr(config_path).to_str() {
        Ok(s) => PathBuf::from(s),
        Err(_) => {
            set_error("config path is not valid UTF-8");
            return AnnStatus::Validation;
        }
    };
    let out_path = match CStr::from_ptr(out_dir).to_str() {
        Ok(s) => PathBuf::from(s),
        Err(_) => {
            set_error("output path is not valid UTF-8");
            return AnnStatus::Validation;
        }
    };
    let args = annulus::cli::CommonArgs {
        config: cfg_path,
        out: out_path,
        workers: Some(1),
        overrides: Vec::new(),
    };
    let cli = annulus::cli::Cli { command: annulus::cli::Command::Simulate(args) };
    let code = annulus::cli::dispatch(cli);
    match code {
        0 => AnnStatus::Ok,
        2 => {
            set_error("validation error (see stderr)");
            AnnStatus::Validation
        }
        _ => {
            set_error("numerical failure (see stderr)");
            AnnStatus::Numeric
        }
    }
}
