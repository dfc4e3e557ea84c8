//! C interface to the `qdrap` simulator.
//!
//! Objects are opaque handles created by `*_new` and released by the
//! matching `*_free`. Every fallible call returns a [`QdrapStatus`]; on a
//! non-zero status the message is available from
//! [`qdrap_last_error_message`] on the same thread. Results are written
//! through out-pointers, which are left untouched on failure.
//!
//! Panics never cross the boundary: they are reported as
//! [`QdrapStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qdrap::dynamics::{evolve, PhononParams, StateTrajectory, SystemParams};
use qdrap::photonstats::{cz_process_fidelity, estimate_g2, CoincidenceHistogram};
use qdrap::pulse::{treacy_gdd, PulseShape, PulseSpec, StretcherGeometry};
use qdrap::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdrapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The integrator failed or the state left the physical domain.
    Numerical = 3,
    /// The output buffer is too short; nothing was written.
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QdrapShape {
    Sech = 0,
    Gaussian = 1,
}

/// Pulse parameters.
pub struct QdrapPulse(PulseSpec);

/// Quantum-dot parameters: radiative decay, pure dephasing and phonon bath.
pub struct QdrapSystem(SystemParams);

/// Result of a master-equation run.
pub struct QdrapTrajectory(StateTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn fail(status: QdrapStatus, msg: impl Into<String>) -> QdrapStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> QdrapStatus {
    let status = if e.is_numerical() {
        QdrapStatus::Numerical
    } else {
        QdrapStatus::InvalidArgument
    };
    fail(status, e.to_string())
}

/// Run `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), QdrapStatus>) -> QdrapStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QdrapStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(QdrapStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn check<T>(r: qdrap::Result<T>) -> Result<T, QdrapStatus> {
    r.map_err(from_error)
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, QdrapStatus> {
    p.as_ref().ok_or_else(|| fail(QdrapStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, QdrapStatus> {
    p.as_mut().ok_or_else(|| fail(QdrapStatus::NullPointer, format!("{what} is null")))
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL,
/// 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qdrap_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qdrap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out_pulse` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn qdrap_pulse_new(
    shape: QdrapShape,
    fwhm_ps: f64,
    area_pi: f64,
    gdd_ps2: f64,
    out_pulse: *mut *mut QdrapPulse,
) -> QdrapStatus {
    guard(|| {
        let slot = out(out_pulse, "out_pulse")?;
        let shape = match shape {
            QdrapShape::Sech => PulseShape::Sech,
            QdrapShape::Gaussian => PulseShape::Gaussian,
        };
        let spec = PulseSpec {
            shape,
            fwhm_ps,
            area_pi,
            gdd_ps2,
            carrier_detuning_radps: 0.0,
        };
        check(spec.validate())?;
        *slot = Box::into_raw(Box::new(QdrapPulse(spec)));
        Ok(())
    })
}

/// # Safety
/// `pulse` must be null or a handle from [`qdrap_pulse_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qdrap_pulse_free(pulse: *mut QdrapPulse) {
    if !pulse.is_null() {
        drop(Box::from_raw(pulse));
    }
}

/// Quantum dot without phonons. Add a bath with
/// [`qdrap_system_set_phonons`].
///
/// # Safety
/// `out_system` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn qdrap_system_new(
    radiative_rate_per_ps: f64,
    pure_dephasing_per_ps: f64,
    out_system: *mut *mut QdrapSystem,
) -> QdrapStatus {
    guard(|| {
        let slot = out(out_system, "out_system")?;
        let mut sys = SystemParams::closed().with_radiative_rate(radiative_rate_per_ps);
        sys.pure_dephasing_per_ps = pure_dephasing_per_ps;
        check(sys.validate())?;
        *slot = Box::into_raw(Box::new(QdrapSystem(sys)));
        Ok(())
    })
}

/// # Safety
/// `system` must be a live handle from [`qdrap_system_new`].
#[no_mangle]
pub unsafe extern "C" fn qdrap_system_set_phonons(
    system: *mut QdrapSystem,
    alpha_ps2: f64,
    cutoff_radps: f64,
    temperature_k: f64,
) -> QdrapStatus {
    guard(|| {
        let sys = out(system, "system")?;
        let candidate = sys.0.with_phonons(PhononParams {
            alpha_ps2,
            cutoff_radps,
            temperature_k,
        });
        check(candidate.validate())?;
        sys.0 = candidate;
        Ok(())
    })
}

/// # Safety
/// `system` must be null or a handle from [`qdrap_system_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qdrap_system_free(system: *mut QdrapSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Integrate the master equation from the ground state across the pulse.
///
/// # Safety
/// `pulse` and `system` must be live handles; `out_trajectory` must be
/// valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn qdrap_evolve(
    pulse: *const QdrapPulse,
    system: *const QdrapSystem,
    tolerance: f64,
    out_trajectory: *mut *mut QdrapTrajectory,
) -> QdrapStatus {
    guard(|| {
        let p = obj(pulse, "pulse")?;
        let s = obj(system, "system")?;
        let slot = out(out_trajectory, "out_trajectory")?;
        let field = check(p.0.synthesize())?;
        let traj = check(evolve(&field, &s.0, tolerance))?;
        *slot = Box::into_raw(Box::new(QdrapTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `trajectory` must be null or a handle from [`qdrap_evolve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qdrap_trajectory_free(trajectory: *mut QdrapTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of time samples, 0 for a null handle.
///
/// # Safety
/// `trajectory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qdrap_trajectory_len(trajectory: *const QdrapTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.0.len())
}

/// Excited-state population at the end of the grid and the photon yield
/// (final population plus everything emitted during the grid).
///
/// # Safety
/// `trajectory` must be a live handle; the out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qdrap_trajectory_summary(
    trajectory: *const QdrapTrajectory,
    out_final_pe: *mut f64,
    out_photon_yield: *mut f64,
) -> QdrapStatus {
    guard(|| {
        let t = obj(trajectory, "trajectory")?;
        let a = out(out_final_pe, "out_final_pe")?;
        let b = out(out_photon_yield, "out_photon_yield")?;
        *a = t.0.final_pe();
        *b = t.0.photon_yield();
        Ok(())
    })
}

/// Copy times (ps) and excited-state populations into caller buffers of
/// `len` elements each. Fails with `BufferTooSmall` if `len` is less than
/// [`qdrap_trajectory_len`].
///
/// # Safety
/// `trajectory` must be a live handle; `times_ps` and `p_e` must each
/// point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qdrap_trajectory_copy(
    trajectory: *const QdrapTrajectory,
    times_ps: *mut f64,
    p_e: *mut f64,
    len: usize,
) -> QdrapStatus {
    guard(|| {
        let t = obj(trajectory, "trajectory")?;
        if times_ps.is_null() || p_e.is_null() {
            return Err(fail(QdrapStatus::NullPointer, "output buffer is null"));
        }
        let n = t.0.len();
        if len < n {
            return Err(fail(QdrapStatus::BufferTooSmall, format!("need {n} elements, got {len}")));
        }
        let ts = std::slice::from_raw_parts_mut(times_ps, n);
        let ps = std::slice::from_raw_parts_mut(p_e, n);
        ts.copy_from_slice(&t.0.times());
        ps.copy_from_slice(&t.0.p_e());
        Ok(())
    })
}

/// Group-delay dispersion (ps²) of a grating-pair stretcher.
///
/// # Safety
/// `out_gdd_ps2` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn qdrap_grating_gdd(
    groove_density_per_mm: f64,
    wavelength_nm: f64,
    incidence_angle_deg: f64,
    effective_separation_mm: f64,
    telescope_inserted: bool,
    out_gdd_ps2: *mut f64,
) -> QdrapStatus {
    guard(|| {
        let slot = out(out_gdd_ps2, "out_gdd_ps2")?;
        let geom = StretcherGeometry {
            groove_density_per_mm,
            wavelength_nm,
            incidence_angle_deg,
            effective_separation_mm,
            telescope_inserted,
        };
        *slot = check(treacy_gdd(&geom))?;
        Ok(())
    })
}

/// g²(0) and its standard error from a coincidence histogram.
///
/// `counts` holds an odd number `len` of bins, the middle one centred on
/// zero delay. `n_side_peaks` counts the normalization peaks on both sides
/// together.
///
/// # Safety
/// `counts` must point to `len` readable values; the out-pointers must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn qdrap_estimate_g2(
    counts: *const u64,
    len: usize,
    bin_width_ns: f64,
    rep_period_ns: f64,
    window_ns: f64,
    n_side_peaks: usize,
    out_g2: *mut f64,
    out_sigma: *mut f64,
) -> QdrapStatus {
    guard(|| {
        if counts.is_null() {
            return Err(fail(QdrapStatus::NullPointer, "counts is null"));
        }
        let g = out(out_g2, "out_g2")?;
        let s = out(out_sigma, "out_sigma")?;
        if len % 2 == 0 {
            return Err(fail(QdrapStatus::InvalidArgument, "counts needs an odd number of bins"));
        }
        if !(bin_width_ns > 0.0 && rep_period_ns > 0.0) {
            return Err(fail(QdrapStatus::InvalidArgument, "bin width and repetition period must be positive"));
        }
        let h = CoincidenceHistogram {
            bin_width_ns,
            rep_period_ns,
            counts: std::slice::from_raw_parts(counts, len).to_vec(),
        };
        let r = check(estimate_g2(&h, window_ns, n_side_peaks))?;
        *g = r.g2;
        *s = r.sigma;
        Ok(())
    })
}

/// Process fidelity of the post-selected linear-optics CZ gate for a
/// two-photon overlap `overlap` in [0, 1].
///
/// # Safety
/// `out_fidelity` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn qdrap_cz_fidelity(overlap: f64, out_fidelity: *mut f64) -> QdrapStatus {
    guard(|| {
        let slot = out(out_fidelity, "out_fidelity")?;
        *slot = check(cz_process_fidelity(overlap))?;
        Ok(())
    })
}
