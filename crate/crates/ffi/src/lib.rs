//! C interface to `kepler-averaging`.
//!
//! Objects cross the boundary as opaque handles created by `ka_*_new` or
//! `ka_*` constructors and released with the matching `ka_*_free`. Every
//! fallible call returns a [`KaStatus`]; on failure a message is kept per
//! thread and can be read with [`ka_last_error`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kepler_averaging::averaging::{AveragedFunction, PredictedClass, DEFAULT_TOL_GRAD};
use kepler_averaging::circular::{m_matrix, CircularReport};
use kepler_averaging::continuation::{continue_branch, Branch, ContinuationConfig};
use kepler_averaging::forcing::{ForcingModel, FourierSpectrum};
use kepler_averaging::symplectic::{
    classify_local, Monodromy4, SpectralTolerances, StabilityClass,
};
use kepler_averaging::Error;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    NoConvergence = 3,
    OffManifold = 4,
    DegenerateEquator = 5,
    Numerical = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaStabilityClass {
    Elliptic = 0,
    Hyperbolic = 1,
    MixedEllipticHyperbolic = 2,
    Degenerate = 3,
    OutsideLocalChart = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KaPredictedClass {
    Elliptic = 0,
    Unstable = 1,
    Inconclusive = 2,
}

impl From<StabilityClass> for KaStabilityClass {
    fn from(c: StabilityClass) -> Self {
        match c {
            StabilityClass::Elliptic => Self::Elliptic,
            StabilityClass::Hyperbolic => Self::Hyperbolic,
            StabilityClass::MixedEllipticHyperbolic => Self::MixedEllipticHyperbolic,
            StabilityClass::Degenerate => Self::Degenerate,
            StabilityClass::OutsideLocalChart => Self::OutsideLocalChart,
        }
    }
}

impl From<PredictedClass> for KaPredictedClass {
    fn from(c: PredictedClass) -> Self {
        match c {
            PredictedClass::Elliptic => Self::Elliptic,
            PredictedClass::Unstable => Self::Unstable,
            PredictedClass::Inconclusive => Self::Inconclusive,
        }
    }
}

/// Spectral data of a 4×4 symplectic matrix.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KaSpectrum {
    pub trace: f64,
    pub det_s_minus_i: f64,
    /// Real and imaginary parts of `μ₁ + μ₃` and `μ₂ + μ₄`.
    pub delta: [[f64; 2]; 2],
    /// Eigenvalues `[re, im]`, ordered so that `μ₁μ₃ = μ₂μ₄ = 1`.
    pub eigenvalues: [[f64; 2]; 4],
    pub stability: KaStabilityClass,
}

/// One continued periodic orbit.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KaBranchPoint {
    pub eps: f64,
    /// Initial state `(x1, x2, y1, y2)`.
    pub s0: [f64; 4],
    pub residual: f64,
    pub winding: i64,
    pub spectrum: KaSpectrum,
}

/// Opaque forcing handle.
pub struct KaForcing(ForcingModel);

/// Opaque circular-analysis handle.
pub struct KaCircularReport(CircularReport);

/// Opaque branch handle.
pub struct KaBranch(Branch);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> KaStatus {
    match e {
        Error::NoConvergence { .. } | Error::EmptyBranch(_) => KaStatus::NoConvergence,
        Error::OffManifold { .. } => KaStatus::OffManifold,
        Error::DegenerateEquator => KaStatus::DegenerateEquator,
        Error::InvalidInput(_)
        | Error::Config(_)
        | Error::WrongKind
        | Error::OutOfDomain(..)
        | Error::OutOfTorus { .. } => KaStatus::InvalidInput,
        _ => KaStatus::Numerical,
    }
}

/// Run `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (KaStatus, String)>) -> KaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KaStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            KaStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (KaStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (KaStatus, String) {
    (KaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], (KaStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn spectrum_of(s: &kepler_averaging::symplectic::SpectralSummary) -> KaSpectrum {
    KaSpectrum {
        trace: s.trace,
        det_s_minus_i: s.det_s_minus_i,
        delta: [[s.delta1.re, s.delta1.im], [s.delta2.re, s.delta2.im]],
        eigenvalues: s.eigenvalues.map(|z| [z.re, z.im]),
        stability: s.class.into(),
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ka_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ka_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Linear forcing `p(t) = Σ cₙ e^{int}` from `len` triples `(n, re, im)`.
#[no_mangle]
pub unsafe extern "C" fn ka_forcing_new_fourier(
    n: *const i64,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut KaForcing,
) -> KaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (n, re, im) = (
            slice(n, len, "n")?,
            slice(re, len, "re")?,
            slice(im, len, "im")?,
        );
        if re.iter().chain(im).any(|v| !v.is_finite()) {
            return Err((KaStatus::InvalidInput, "coefficients must be finite".into()));
        }
        let mut s = FourierSpectrum::new();
        for k in 0..len {
            let c = s.coefficient(n[k]) + Complex64::new(re[k], im[k]);
            s = s.with(n[k], c);
        }
        *out = Box::into_raw(Box::new(KaForcing(ForcingModel::linear(s))));
        Ok(())
    })
}

/// `p(t) = e^{iNt} + a e^{−iNt}`.
#[no_mangle]
pub unsafe extern "C" fn ka_forcing_new_two_wave(
    n: i64,
    a_re: f64,
    a_im: f64,
    out: *mut *mut KaForcing,
) -> KaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n == 0 {
            return Err((KaStatus::InvalidInput, "N must be nonzero".into()));
        }
        let s = FourierSpectrum::two_wave(n, Complex64::new(a_re, a_im));
        *out = Box::into_raw(Box::new(KaForcing(ForcingModel::linear(s))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ka_forcing_free(f: *mut KaForcing) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Closed-form analysis on circular orbits with winding `n ≥ 1`.
#[no_mangle]
pub unsafe extern "C" fn ka_circular_analyze(
    f: *const KaForcing,
    n: i64,
    out: *mut *mut KaCircularReport,
) -> KaStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("forcing"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spectrum =
            f.0.spectrum()
                .ok_or((KaStatus::InvalidInput, "forcing is not linear".into()))?;
        let r = m_matrix(spectrum, n).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(KaCircularReport(r)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ka_circular_report_free(r: *mut KaCircularReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// `λ*`, `det M(p)` and `M(p)` in row-major order.
#[no_mangle]
pub unsafe extern "C" fn ka_circular_values(
    r: *const KaCircularReport,
    lambda_star: *mut f64,
    det_m: *mut f64,
    m: *mut f64,
) -> KaStatus {
    guard(|| {
        let r = &r.as_ref().ok_or_else(|| null("report"))?.0;
        if let Some(p) = lambda_star.as_mut() {
            *p = r.lambda_star;
        }
        if let Some(p) = det_m.as_mut() {
            *p = r.det_m;
        }
        if !m.is_null() {
            let out = std::slice::from_raw_parts_mut(m, 4);
            out.copy_from_slice(&[
                r.m_matrix[0][0],
                r.m_matrix[0][1],
                r.m_matrix[1][0],
                r.m_matrix[1][1],
            ]);
        }
        Ok(())
    })
}

/// Predicted class of family 0 (`+e^{i(λ*+Nt)}`) or 1 (`−e^{i(λ*+Nt)}`).
#[no_mangle]
pub unsafe extern "C" fn ka_circular_family_class(
    r: *const KaCircularReport,
    family: usize,
    out: *mut KaPredictedClass,
) -> KaStatus {
    guard(|| {
        let r = &r.as_ref().ok_or_else(|| null("report"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let fam = r.family_predictions.get(family).ok_or((
            KaStatus::OutOfRange,
            format!("family {family} out of range"),
        ))?;
        *out = fam.class.into();
        Ok(())
    })
}

/// Find a critical point of `γ_N` from the seed `(λ, η, ξ)` and continue the
/// periodic orbit through it over `eps[0..len]` (positive, increasing).
#[no_mangle]
pub unsafe extern "C" fn ka_branch_continue(
    f: *const KaForcing,
    n: i64,
    seed_lambda: f64,
    seed_eta: f64,
    seed_xi: f64,
    eps: *const f64,
    len: usize,
    out: *mut *mut KaBranch,
) -> KaStatus {
    guard(|| {
        let f = &f.as_ref().ok_or_else(|| null("forcing"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let eps = slice(eps, len, "eps")?;
        let avg = AveragedFunction::new(n, f.clone()).map_err(lib_err)?;
        let report =
            avg.find_critical_points(&[[seed_lambda, seed_eta, seed_xi]], DEFAULT_TOL_GRAD);
        let cp = report.points.first().ok_or_else(|| {
            let why = report
                .failures
                .first()
                .map_or("flat averaged function".to_string(), |s| s.error.clone());
            (
                KaStatus::NoConvergence,
                format!("no critical point from the seed: {why}"),
            )
        })?;
        let b = continue_branch(f, cp, n, eps, &ContinuationConfig::default()).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(KaBranch(b)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ka_branch_free(b: *mut KaBranch) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Number of converged points; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ka_branch_len(b: *const KaBranch) -> usize {
    b.as_ref().map_or(0, |b| b.0.points.len())
}

/// Prediction from the critical point and whether the branch stopped early.
#[no_mangle]
pub unsafe extern "C" fn ka_branch_info(
    b: *const KaBranch,
    predicted: *mut KaPredictedClass,
    critical_point: *mut f64,
    truncated: *mut bool,
) -> KaStatus {
    guard(|| {
        let b = &b.as_ref().ok_or_else(|| null("branch"))?.0;
        if let Some(p) = predicted.as_mut() {
            *p = b.predicted_class.into();
        }
        if !critical_point.is_null() {
            let cp = &b.critical_point;
            std::slice::from_raw_parts_mut(critical_point, 3)
                .copy_from_slice(&[cp.lambda, cp.eta, cp.xi]);
        }
        if let Some(t) = truncated.as_mut() {
            *t = b.truncated;
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ka_branch_point(
    b: *const KaBranch,
    index: usize,
    out: *mut KaBranchPoint,
) -> KaStatus {
    guard(|| {
        let b = &b.as_ref().ok_or_else(|| null("branch"))?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let p = b
            .points
            .get(index)
            .ok_or((KaStatus::OutOfRange, format!("point {index} out of range")))?;
        *out = KaBranchPoint {
            eps: p.eps,
            s0: p.s0.to_array(),
            residual: p.newton_residual,
            winding: p.winding,
            spectrum: spectrum_of(&p.monodromy_summary),
        };
        Ok(())
    })
}

/// Classify a row-major 4×4 symplectic matrix.
#[no_mangle]
pub unsafe extern "C" fn ka_classify_monodromy(m: *const f64, out: *mut KaSpectrum) -> KaStatus {
    guard(|| {
        let m = slice(m, 16, "matrix")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let mut arr = [0.0; 16];
        arr.copy_from_slice(m);
        let s = Monodromy4::from_row_major(&arr);
        let summary = classify_local(&s, 0.0, &SpectralTolerances::default()).map_err(lib_err)?;
        *out = spectrum_of(&summary);
        Ok(())
    })
}
