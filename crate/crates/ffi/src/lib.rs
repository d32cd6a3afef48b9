//! C ABI over the waitmarket solvers.
//!
//! Every function returns a [`WmStatus`]; outputs go through pointer arguments. Handles are
//! opaque and must be released with the matching `*_free` function. After a non-OK status,
//! [`wm_last_error`] returns a message for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use waitmarket::commitment::{self, CommitmentSolution};
use waitmarket::config::parse_environment;
use waitmarket::equilibrium::{self, EquilibriumOutcome};
use waitmarket::numerics::DEFAULT_GRID_NODES;
use waitmarket::{validate, Environment, Error};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed JSON, schema violation, or an environment failing validation.
    Config = 2,
    /// Non-finite values, failed bracketing or exhausted iterations.
    Numeric = 3,
    /// Argument outside the domain of the operation.
    Domain = 4,
    /// Environment does not satisfy the operation's preconditions.
    Precondition = 5,
    /// Output buffer shorter than required.
    BufferTooSmall = 6,
    /// Internal panic caught at the boundary.
    Panic = 7,
}

/// Market environment.
pub struct WmEnvironment {
    inner: Environment,
}

/// Commitment exit profile and value.
pub struct WmCommitment {
    inner: CommitmentSolution,
}

/// Equilibrium outcome.
pub struct WmEquilibrium {
    inner: EquilibriumOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> WmStatus {
    match err {
        Error::Argument(_) | Error::Parse { .. } | Error::Config(_) | Error::InvalidEnvironment(_) => WmStatus::Config,
        Error::Domain(_) | Error::Unbounded(_) => WmStatus::Domain,
        Error::Precondition(_) | Error::UndefinedConditional(_) | Error::Singularity(_) => WmStatus::Precondition,
        Error::Numeric(_) | Error::CapExceeded { .. } | Error::NoBracket(_) | Error::Convergence(_) => WmStatus::Numeric,
    }
}

/// Runs `body`, translating errors and panics into status codes.
fn guard<F>(body: F) -> WmStatus
where
    F: FnOnce() -> Result<(), (WmStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => WmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            WmStatus::Panic
        }
    }
}

fn lift<T>(r: waitmarket::Result<T>) -> Result<T, (WmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (WmStatus, String) {
    (WmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (WmStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), (WmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, len: usize) -> Result<(), (WmStatus, String)> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < src.len() {
        return Err((WmStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

/// Message for the last non-OK status on this thread; valid until the next failing call.
#[no_mangle]
pub extern "C" fn wm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds and validates an environment from JSON. `grid_nodes` = 0 selects the default grid.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_environment_from_json(
    json: *const c_char,
    grid_nodes: usize,
    out: *mut *mut WmEnvironment,
) -> WmStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| (WmStatus::Config, format!("json is not UTF-8: {e}")))?;
        let nodes = if grid_nodes == 0 { DEFAULT_GRID_NODES } else { grid_nodes };
        let env = lift(parse_environment(text, nodes))?;
        let report = lift(validate(&env))?;
        if !report.passed() {
            return Err((WmStatus::Config, format!("environment failed validation: {}", report.summary())));
        }
        out.write(Box::into_raw(Box::new(WmEnvironment { inner: env })));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`wm_environment_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wm_environment_free(env: *mut WmEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of type-grid nodes.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wm_environment_grid_len(env: *const WmEnvironment, out: *mut usize) -> WmStatus {
    guard(|| {
        let env = deref(env, "env")?;
        write_out(out, env.inner.grid().len(), "out")
    })
}

/// Copies the type-grid nodes into `buf` (capacity `len`).
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wm_environment_grid_nodes(env: *const WmEnvironment, buf: *mut f64, len: usize) -> WmStatus {
    guard(|| {
        let env = deref(env, "env")?;
        copy_out(env.inner.grid().nodes(), buf, len)
    })
}

/// Solves for the commitment exit profile.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wm_commitment_solve(env: *const WmEnvironment, out: *mut *mut WmCommitment) -> WmStatus {
    guard(|| {
        let env = deref(env, "env")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sol = lift(commitment::exit_profile(&env.inner))?;
        out.write(Box::into_raw(Box::new(WmCommitment { inner: sol })));
        Ok(())
    })
}

/// # Safety
/// `sol` must come from [`wm_commitment_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wm_commitment_free(sol: *mut WmCommitment) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Commitment value.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wm_commitment_value(sol: *const WmCommitment, out: *mut f64) -> WmStatus {
    guard(|| {
        let sol = deref(sol, "sol")?;
        write_out(out, sol.inner.value(), "out")
    })
}

/// Number of exit times (one per grid node).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wm_commitment_len(sol: *const WmCommitment, out: *mut usize) -> WmStatus {
    guard(|| {
        let sol = deref(sol, "sol")?;
        write_out(out, sol.inner.exit_times().len(), "out")
    })
}

/// Copies the exit times into `buf` (capacity `len`).
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wm_commitment_exit_times(sol: *const WmCommitment, buf: *mut f64, len: usize) -> WmStatus {
    guard(|| {
        let sol = deref(sol, "sol")?;
        copy_out(sol.inner.exit_times(), buf, len)
    })
}

/// Price when time `t` and type `y` are revealed to the buyer.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wm_price_revealed(env: *const WmEnvironment, t: f64, y: f64, out: *mut f64) -> WmStatus {
    guard(|| {
        let env = deref(env, "env")?;
        let p = lift(commitment::price_revealed(&env.inner, t, y))?;
        write_out(out, p, "out")
    })
}

/// Price when only time `t` is revealed, pooled over types still in the market.
///
/// # Safety
/// Pointers must be valid; `sol` must be solved for `env`.
#[no_mangle]
pub unsafe extern "C" fn wm_price_pooled(
    env: *const WmEnvironment,
    sol: *const WmCommitment,
    t: f64,
    out: *mut f64,
) -> WmStatus {
    guard(|| {
        let env = deref(env, "env")?;
        let sol = deref(sol, "sol")?;
        let p = lift(commitment::price_pooled(&env.inner, &sol.inner, t))?;
        write_out(out, p, "out")
    })
}

/// Solves for the opaque-market equilibrium.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wm_equilibrium_solve(env: *const WmEnvironment, out: *mut *mut WmEquilibrium) -> WmStatus {
    guard(|| {
        let env = deref(env, "env")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let eq = lift(equilibrium::solve(&env.inner))?;
        out.write(Box::into_raw(Box::new(WmEquilibrium { inner: eq })));
        Ok(())
    })
}

/// # Safety
/// `eq` must come from [`wm_equilibrium_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn wm_equilibrium_free(eq: *mut WmEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// Equilibrium price; `ad_infinitum` is set when the seller never exits.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn wm_equilibrium_price(eq: *const WmEquilibrium, price: *mut f64, ad_infinitum: *mut bool) -> WmStatus {
    guard(|| {
        let eq = deref(eq, "eq")?;
        write_out(price, eq.inner.price(), "price")?;
        write_out(ad_infinitum, eq.inner.interior().is_none(), "ad_infinitum")
    })
}

/// Copies the equilibrium exit times into `buf` (capacity `len`); infinite when the seller never exits.
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn wm_equilibrium_exit_times(eq: *const WmEquilibrium, buf: *mut f64, len: usize) -> WmStatus {
    guard(|| {
        let eq = deref(eq, "eq")?;
        match &eq.inner {
            EquilibriumOutcome::Interior(sol) => copy_out(&sol.exit_times, buf, len),
            EquilibriumOutcome::AdInfinitum { .. } => {
                if buf.is_null() {
                    return Err(null("buffer"));
                }
                for i in 0..len {
                    buf.add(i).write(f64::INFINITY);
                }
                Ok(())
            }
        }
    })
}
