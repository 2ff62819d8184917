//! Newton shooting for `2π`-periodic orbits along `ε`, seeded by critical
//! points of the averaged function, with per-point monodromy classification.
//!
//! In Poincaré variables `(θ, r, q, p) = (λ, Λ, η, ξ)` with `h(r) = −1/(2r²)`,
//! the resonant family at `ε = 0` is `λ = λ₀ + Nt`, `Λ = Λ_N`, `(η, ξ)`
//! fixed, and its period map has derivative `P_*` with `τ_N = 2πh″(Λ_N)`.
//! Shooting solves `Π_ε(s) = s` with Newton steps taken in the chart and
//! convergence measured in Cartesian coordinates. The problem is regular for
//! `ε > 0` at a nondegenerate critical point.

use nalgebra::{Matrix3, Matrix4, Vector4};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::angle;
use crate::averaging::{AveragedFunction, CriticalPoint, PredictedClass};
use crate::error::{Error, Result};
use crate::flow::{
    integrate, monodromy_in_poincare, period_map, period_map_state, IntegratorConfig, CHART_FD_STEP,
};
use crate::forcing::ForcingModel;
use crate::kepler::{
    cartesian_to_poincare, cartesian_to_poincare_jacobian, poincare_to_cartesian,
    poincare_to_cartesian_jacobian, winding_number, CartesianState, PoincareState,
};
use crate::symplectic::{
    classify_local, parabolic, Monodromy4, SpectralSummary, SpectralTolerances, StabilityClass,
};

/// `Λ_N = |N|^{−1/3}`.
pub fn resonant_action(n: i64) -> f64 {
    (n.unsigned_abs() as f64).powf(-1.0 / 3.0)
}

/// `τ_N = 2πh″(Λ_N) = −6πN^{4/3}`.
pub fn tau(n: i64) -> f64 {
    -6.0 * PI * (n.unsigned_abs() as f64).powf(4.0 / 3.0)
}

/// `h″(Λ_N) = −3N^{4/3}`.
pub fn h_second(n: i64) -> f64 {
    -3.0 * (n.unsigned_abs() as f64).powf(4.0 / 3.0)
}

/// Leading coefficient of `det(S(ε) − I) ≈ C ε³`, `C = −τ_N(2π)³ det D²γ_N`.
pub fn predicted_det_coefficient(n: i64, hessian: &Matrix3<f64>) -> f64 {
    -tau(n) * TAU.powi(3) * hessian.determinant()
}

/// Leading coefficient of `tr S(ε) − 4 ≈ C ε`, `C = 4π²h″(Λ_N)∂²λλγ_N`.
pub fn predicted_trace_coefficient(n: i64, hessian: &Matrix3<f64>) -> f64 {
    4.0 * PI * PI * h_second(n) * hessian[(0, 0)]
}

/// Geometric grid of `count` values from `lo` to `hi`.
pub fn geometric_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|k| lo * (ratio * k as f64).exp()).collect()
}

pub fn default_eps_grid() -> Vec<f64> {
    geometric_grid(1e-4, 1e-2, 9)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub integrator: IntegratorConfig,
    pub tol_shoot: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    pub spectral: SpectralTolerances,
    /// Absolute floor of the `det(S − I)` sign tolerance.
    pub tol_det_floor: f64,
    /// Fraction of the predicted `|det(S − I)|` used as its sign tolerance.
    pub tol_det_fraction: f64,
    /// Fits skip this many of the smallest `ε`.
    pub fit_skip: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            tol_shoot: 1e-10,
            max_newton: 25,
            max_halvings: 8,
            spectral: SpectralTolerances::default(),
            tol_det_floor: 1e-12,
            tol_det_fraction: 0.01,
            fit_skip: 2,
        }
    }
}

impl ContinuationConfig {
    /// Sign tolerance for `det(S − I)` at `eps`.
    pub fn tol_det(&self, eps: f64, det_coefficient: Option<f64>) -> f64 {
        match det_coefficient {
            Some(c) => self
                .tol_det_floor
                .max(self.tol_det_fraction * eps.powi(3) * c.abs()),
            None => self.tol_det_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub eps: f64,
    pub s0: CartesianState,
    pub poincare0: PoincareState,
    /// `‖Π_ε(s0) − s0‖` from a fresh integration after Newton stopped.
    pub newton_residual: f64,
    pub newton_iterations: usize,
    pub monodromy: Monodromy4,
    pub poincare_monodromy: Monodromy4,
    pub monodromy_summary: SpectralSummary,
    pub tol_det: f64,
    pub winding: i64,
}

impl BranchPoint {
    pub fn class(&self) -> StabilityClass {
        self.monodromy_summary.class
    }
}

/// Initial condition of the resonant orbit through a critical point.
pub fn seed_from_critical_point(cp: &CriticalPoint, n: i64) -> Result<CartesianState> {
    poincare_to_cartesian(&PoincareState::new(
        cp.lambda,
        resonant_action(n),
        cp.eta,
        cp.xi,
    ))
}

/// Seed with the first-order action shift that cancels the mean-longitude
/// drift: `h′(Λ) = N + ε⟨∂_Λ U⟩`, so `δΛ = ε⟨∂_Λ U⟩ / h″(Λ_N)`.
pub fn first_order_seed(
    f: &ForcingModel,
    cp: &CriticalPoint,
    n: i64,
    eps: f64,
) -> Result<CartesianState> {
    let avg = AveragedFunction::new(n.abs(), f.clone())?;
    let drift = avg.mean_action_derivative(cp.lambda, cp.eta, cp.xi)?;
    let big_l = resonant_action(n) + eps * drift / h_second(n);
    poincare_to_cartesian(&PoincareState::new(cp.lambda, big_l, cp.eta, cp.xi))
}

/// Trace/determinant plus spectral verdict, with the elliptic margins
/// `|det(S − I)| > 10·tol_det` and `tr S < 4 − 10·tol_det`.
pub fn classify_with_margin(
    s: &Monodromy4,
    chart_radius: f64,
    tol: &SpectralTolerances,
) -> Result<SpectralSummary> {
    let mut summary = classify_local(s, chart_radius, tol)?;
    if summary.class == StabilityClass::Elliptic {
        let margin = 10.0 * tol.tol_det;
        if summary.det_s_minus_i.abs() <= margin || summary.trace >= 4.0 - margin {
            summary.class = StabilityClass::Degenerate;
        }
    }
    Ok(summary)
}

/// Newton on `Π_ε(s) − s` from `guess`.
pub fn shoot(
    f: &ForcingModel,
    eps: f64,
    guess: &CartesianState,
    n: i64,
    cfg: &ContinuationConfig,
    det_coefficient: Option<f64>,
) -> Result<BranchPoint> {
    let icfg = &cfg.integrator;
    // Newton runs in the chart, where the ε = 0 fixed set is the flat
    // slice Λ = Λ_N; in Cartesian coordinates it is curved and full steps
    // leave it quadratically, which τ_N amplifies into stalls
    let mut p = Vector4::from(cartesian_to_poincare(guess)?.to_symplectic());
    let mut iterations = 0;
    let chart_residual = |p: &Vector4<f64>| -> Result<(Vector4<f64>, CartesianState)> {
        let s0 = poincare_to_cartesian(&PoincareState::from_symplectic((*p).into()))?;
        let s1 = period_map_state(f, eps, &s0, icfg)?;
        let p1 = Vector4::from(cartesian_to_poincare(&s1)?.to_symplectic());
        let mut d = p1 - p;
        d[0] = angle::diff(p1[0], p[0]);
        Ok((d, s0))
    };
    loop {
        let s0 = poincare_to_cartesian(&PoincareState::from_symplectic(p.into()))?;
        let (s1, dpi) = period_map(f, eps, &s0, icfg)?;
        let cart = s1.distance(&s0);
        log::debug!("shoot eps={eps:e} it={iterations} residual={cart:e}");
        if cart < 0.1 * cfg.tol_shoot && eps != 0.0 {
            break;
        }
        let p1 = Vector4::from(cartesian_to_poincare(&s1)?.to_symplectic());
        let mut residual = p1 - p;
        residual[0] = angle::diff(p1[0], p[0]);
        let r = residual.norm();
        let into = poincare_to_cartesian_jacobian(
            &PoincareState::from_symplectic(p.into()),
            CHART_FD_STEP,
        )?;
        let out = cartesian_to_poincare_jacobian(&s1, CHART_FD_STEP)?;
        let jac = out * dpi.entries() * into - Matrix4::identity();
        let sv = jac.svd(false, false).singular_values;
        let (smin, smax) = (sv.min(), sv.max());
        if eps == 0.0 || smin <= 1e-11 * smax {
            return Err(Error::SingularJacobian(smin));
        }
        if iterations >= cfg.max_newton {
            if cart < cfg.tol_shoot {
                break;
            }
            return Err(Error::NoConvergence {
                what: "periodic-orbit shooting",
                iterations,
            });
        }
        iterations += 1;
        let step = jac
            .lu()
            .solve(&(-residual))
            .ok_or(Error::SingularJacobian(smin))?;
        log::debug!("  sv={:?} step={:e}", sv.as_slice(), step.norm());
        let mut scale = 1.0;
        let mut next = p + step;
        for _ in 0..cfg.max_halvings {
            let ok = chart_residual(&next)
                .map(|(d, _)| d.norm() <= r)
                .unwrap_or(false);
            if ok {
                break;
            }
            scale *= 0.5;
            next = p + step * scale;
        }
        p = next;
    }
    let s = poincare_to_cartesian(&PoincareState::from_symplectic(p.into()))?.to_array();

    // verification run, also supplying the monodromy and the winding
    let s0 = CartesianState::from_array(s);
    let rec = integrate(f, eps, &s0, (0.0, TAU), icfg, true)?;
    let s1 = rec.final_state();
    let newton_residual = s1.distance(&s0);
    if newton_residual >= cfg.tol_shoot {
        return Err(Error::NoConvergence {
            what: "periodic-orbit shooting (verification)",
            iterations,
        });
    }
    let monodromy = rec.monodromy.expect("variational run");
    let path: Vec<CartesianState> = rec.samples.iter().map(|(_, st)| *st).collect();
    let winding = winding_number(&path, 1e-6)?;
    let poincare_monodromy = monodromy_in_poincare(&monodromy, &s0)?;
    let tol_det = cfg.tol_det(eps, det_coefficient);
    let tol = SpectralTolerances {
        tol_det,
        ..cfg.spectral
    };
    let chart_radius = (poincare_monodromy.entries() - parabolic(tau(n))).norm();
    // trace and det(S − I) are similarity invariants, so the Cartesian
    // matrix is classified and the chart-transported one only reported
    let monodromy_summary = classify_with_margin(&monodromy, chart_radius, &tol)?;
    Ok(BranchPoint {
        eps,
        s0,
        poincare0: cartesian_to_poincare(&s0)?,
        newton_residual,
        newton_iterations: iterations,
        monodromy,
        poincare_monodromy,
        monodromy_summary,
        tol_det,
        winding,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub n: i64,
    pub critical_point: CriticalPoint,
    pub points: Vec<BranchPoint>,
    pub predicted_class: PredictedClass,
    /// Continuation stopped before the end of the grid.
    pub truncated: bool,
    pub failure: Option<String>,
    /// Computed for `t ↦ U(−t, x)` at winding `|N|` because `N < 0`.
    pub time_reversed: bool,
}

impl Branch {
    pub fn eps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.eps).collect()
    }

    pub fn classes(&self) -> Vec<StabilityClass> {
        self.points.iter().map(BranchPoint::class).collect()
    }

    pub fn to_records(&self) -> Vec<BranchRecord> {
        self.points.iter().map(BranchRecord::from).collect()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, &BranchExport::from(self))?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "eps,class,trace,det_s_minus_i,trace_minus_4_over_eps,det_over_eps3,residual"
        )?;
        for p in &self.points {
            let s = &p.monodromy_summary;
            writeln!(
                w,
                "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.6e}",
                p.eps,
                s.class,
                s.trace,
                s.det_s_minus_i,
                (s.trace - 4.0) / p.eps,
                s.det_s_minus_i / p.eps.powi(3),
                p.newton_residual
            )?;
        }
        Ok(())
    }
}

/// Per-point export record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub eps: f64,
    pub s0: [f64; 4],
    pub poincare0: [f64; 4],
    pub residual: f64,
    pub class: StabilityClass,
    pub eigenvalues: [[f64; 2]; 4],
    pub trace: f64,
    pub det_s_minus_i: f64,
    pub winding: i64,
}

impl From<&BranchPoint> for BranchRecord {
    fn from(p: &BranchPoint) -> Self {
        let s = &p.monodromy_summary;
        Self {
            eps: p.eps,
            s0: p.s0.to_array(),
            poincare0: p.poincare0.to_symplectic(),
            residual: p.newton_residual,
            class: s.class,
            eigenvalues: s.eigenvalues.map(|z| [z.re, z.im]),
            trace: s.trace,
            det_s_minus_i: s.det_s_minus_i,
            winding: p.winding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchExport {
    pub n: i64,
    pub critical_point: CriticalPoint,
    pub predicted_class: PredictedClass,
    pub truncated: bool,
    pub failure: Option<String>,
    pub time_reversed: bool,
    pub points: Vec<BranchRecord>,
}

impl From<&Branch> for BranchExport {
    fn from(b: &Branch) -> Self {
        Self {
            n: b.n,
            critical_point: b.critical_point.clone(),
            predicted_class: b.predicted_class,
            truncated: b.truncated,
            failure: b.failure.clone(),
            time_reversed: b.time_reversed,
            points: b.to_records(),
        }
    }
}

/// Continue the orbit through `cp` along `eps_grid`, each point seeded by the
/// previous one. For `N < 0` the branch is computed with time reversed.
pub fn continue_branch(
    f: &ForcingModel,
    cp: &CriticalPoint,
    n: i64,
    eps_grid: &[f64],
    cfg: &ContinuationConfig,
) -> Result<Branch> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "winding number N must be nonzero".into(),
        ));
    }
    if eps_grid.is_empty() || eps_grid[0] <= 0.0 || eps_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "eps grid must be positive and strictly increasing".into(),
        ));
    }
    let time_reversed = n < 0;
    let forcing = if time_reversed {
        f.time_reversed()
    } else {
        f.clone()
    };
    let hessian = cp.hessian_matrix();
    let det_coefficient = match cp.predicted_class {
        PredictedClass::Inconclusive => None,
        _ => Some(predicted_det_coefficient(n, &hessian)),
    };
    let seed = Vector4::from(seed_from_critical_point(cp, n)?.to_array());
    let mut points: Vec<BranchPoint> = Vec::with_capacity(eps_grid.len());
    let mut failure = None;
    for &eps in eps_grid {
        // the orbit leaves the seed linearly in ε
        let guess = match points.last() {
            Some(prev) => {
                let d = Vector4::from(prev.s0.to_array()) - seed;
                CartesianState::from_array((seed + d * (eps / prev.eps)).into())
            }
            None => first_order_seed(&forcing, cp, n, eps)?,
        };
        match shoot(&forcing, eps, &guess, n, cfg, det_coefficient) {
            Ok(p) => points.push(p),
            Err(e) => {
                if points.is_empty() {
                    return Err(Error::EmptyBranch(e.to_string()));
                }
                log::warn!("branch truncated at eps = {eps:.3e}: {e}");
                failure = Some(format!("eps = {eps:e}: {e}"));
                break;
            }
        }
    }
    let sign = if time_reversed { -1 } else { 1 };
    for p in &mut points {
        p.winding *= sign;
    }
    Ok(Branch {
        n,
        critical_point: cp.clone(),
        truncated: points.len() < eps_grid.len(),
        predicted_class: cp.predicted_class,
        points,
        failure,
        time_reversed,
    })
}

/// Least-squares line `y = a + b x`; returns `(a, b)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub eps_used: Vec<f64>,
    /// Slope of `log|det(S − I)|` against `log ε`.
    pub det_slope: f64,
    pub det_log_intercept: f64,
    /// `lim det(S − I)/ε³`, from a line through `det/ε³` against `ε`.
    pub det_coefficient: f64,
    pub det_coefficient_predicted: f64,
    pub det_relative_error: f64,
    /// `lim (tr S − 4)/ε`, from a line through `(tr S − 4)/ε` against `ε`.
    pub trace_coefficient: f64,
    pub trace_coefficient_predicted: f64,
    pub trace_relative_error: f64,
}

/// Fit the small-`ε` expansions of `det(S − I)` and `tr S − 4`.
pub fn expansion_check(
    branch: &Branch,
    gamma_hessian: &Matrix3<f64>,
    cfg: &ContinuationConfig,
) -> Result<ExpansionFit> {
    let pts = &branch.points;
    let mut used: Vec<&BranchPoint> = Vec::new();
    for p in pts.iter().skip(cfg.fit_skip) {
        if used.first().is_some_and(|q| q.class() != p.class()) {
            break;
        }
        used.push(p);
    }
    used.retain(|p| p.monodromy_summary.det_s_minus_i != 0.0);
    let have = used.len();
    let spans_decade = have >= 2 && used[have - 1].eps / used[0].eps >= 10.0 * (1.0 - 1e-9);
    if have < 4 || !spans_decade {
        return Err(Error::InsufficientPoints { needed: 4, have });
    }
    let eps: Vec<f64> = used.iter().map(|p| p.eps).collect();
    let dets: Vec<f64> = used
        .iter()
        .map(|p| p.monodromy_summary.det_s_minus_i)
        .collect();
    let traces: Vec<f64> = used.iter().map(|p| p.monodromy_summary.trace).collect();
    if dets.iter().any(|d| d.signum() != dets[0].signum()) {
        return Err(Error::InsufficientPoints { needed: 4, have: 0 });
    }
    let log_eps: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let log_det: Vec<f64> = dets.iter().map(|d| d.abs().ln()).collect();
    let (det_log_intercept, det_slope) = linear_fit(&log_eps, &log_det);
    let scaled_det: Vec<f64> = dets.iter().zip(&eps).map(|(d, e)| d / e.powi(3)).collect();
    let (det_coefficient, _) = linear_fit(&eps, &scaled_det);
    let scaled_trace: Vec<f64> = traces
        .iter()
        .zip(&eps)
        .map(|(t, e)| (t - 4.0) / e)
        .collect();
    let (trace_coefficient, _) = linear_fit(&eps, &scaled_trace);
    let det_coefficient_predicted = predicted_det_coefficient(branch.n, gamma_hessian);
    let trace_coefficient_predicted = predicted_trace_coefficient(branch.n, gamma_hessian);
    let rel = |got: f64, want: f64| ((got - want) / want).abs();
    Ok(ExpansionFit {
        eps_used: eps,
        det_slope,
        det_log_intercept,
        det_coefficient,
        det_coefficient_predicted,
        det_relative_error: rel(det_coefficient, det_coefficient_predicted),
        trace_coefficient,
        trace_coefficient_predicted,
        trace_relative_error: rel(trace_coefficient, trace_coefficient_predicted),
    })
}

/// Observed class collapsed onto the prediction vocabulary.
pub fn observed_prediction_class(c: StabilityClass) -> PredictedClass {
    match c {
        StabilityClass::Elliptic => PredictedClass::Elliptic,
        StabilityClass::Hyperbolic | StabilityClass::MixedEllipticHyperbolic => {
            PredictedClass::Unstable
        }
        StabilityClass::Degenerate | StabilityClass::OutsideLocalChart => {
            PredictedClass::Inconclusive
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAgreement {
    pub eps: f64,
    pub observed: StabilityClass,
    /// `None` when the prediction is inconclusive.
    pub agrees: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchVerdict {
    pub predicted: PredictedClass,
    pub points: Vec<PointAgreement>,
    /// `None` when the prediction is inconclusive.
    pub all_agree: Option<bool>,
    pub outside_chart_eps: Vec<f64>,
}

pub fn classify_branch(branch: &Branch) -> BranchVerdict {
    let predicted = branch.predicted_class;
    let points: Vec<PointAgreement> = branch
        .points
        .iter()
        .map(|p| PointAgreement {
            eps: p.eps,
            observed: p.class(),
            agrees: (predicted != PredictedClass::Inconclusive)
                .then(|| observed_prediction_class(p.class()) == predicted),
        })
        .collect();
    let all_agree = (predicted != PredictedClass::Inconclusive)
        .then(|| !points.is_empty() && points.iter().all(|p| p.agrees == Some(true)));
    let outside_chart_eps = branch
        .points
        .iter()
        .filter(|p| p.class() == StabilityClass::OutsideLocalChart)
        .map(|p| p.eps)
        .collect();
    BranchVerdict {
        predicted,
        points,
        all_agree,
        outside_chart_eps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::{AveragedFunction, DEFAULT_TOL_GRAD};
    use crate::forcing::FourierSpectrum;
    use num_complex::Complex64;

    fn two_wave(a: f64) -> ForcingModel {
        ForcingModel::linear(FourierSpectrum::two_wave(1, Complex64::new(a, 0.0)))
    }

    fn critical_points(f: &ForcingModel) -> (CriticalPoint, CriticalPoint) {
        let avg = AveragedFunction::new(1, f.clone()).unwrap();
        let r = avg.find_critical_points(&[[0.0, 0.0, 0.0], [PI, 0.0, 0.0]], DEFAULT_TOL_GRAD);
        assert_eq!(r.points.len(), 2);
        (r.points[0].clone(), r.points[1].clone())
    }

    #[test]
    fn seeds() {
        let (a, b) = critical_points(&two_wave(0.0));
        let s = seed_from_critical_point(&a, 1).unwrap();
        assert!(s.distance(&CartesianState::new(1.0, 0.0, 0.0, 1.0)) < 1e-15);
        let s = seed_from_critical_point(&b, 1).unwrap();
        assert!(s.distance(&CartesianState::new(-1.0, 0.0, 0.0, -1.0)) < 1e-15);
        let s = seed_from_critical_point(&a, 2).unwrap();
        // circular speed 1/Λ = 2^{1/3}
        let want = CartesianState::new(2f64.powf(-2.0 / 3.0), 0.0, 0.0, 2f64.powf(1.0 / 3.0));
        assert!(s.distance(&want) < 1e-15, "{s:?} {a:?}");
    }

    #[test]
    fn grid_defaults() {
        let g = default_eps_grid();
        assert_eq!(g.len(), 9);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[8] - 1e-2).abs() < 1e-15);
        assert!((g[2] - 10f64.powf(-3.5)).abs() < 1e-15);
    }

    #[test]
    fn shoot_examples() {
        let _ = env_logger::builder().is_test(true).try_init();
        let f = two_wave(0.0);
        let (a, b) = critical_points(&f);
        let cfg = ContinuationConfig::default();
        let coef = |cp: &CriticalPoint| Some(predicted_det_coefficient(1, &cp.hessian_matrix()));
        let p = shoot(
            &f,
            1e-3,
            &first_order_seed(&f, &a, 1, 1e-3).unwrap(),
            1,
            &cfg,
            coef(&a),
        )
        .unwrap();
        assert_eq!(p.class(), StabilityClass::Elliptic);
        assert!(p.newton_residual < cfg.tol_shoot);
        assert_eq!(p.winding, 1);
        let q = shoot(
            &f,
            1e-3,
            &first_order_seed(&f, &b, 1, 1e-3).unwrap(),
            1,
            &cfg,
            coef(&b),
        )
        .unwrap();
        assert!(q.class().is_unstable(), "{}", q.class());
        let err = shoot(
            &f,
            0.0,
            &seed_from_critical_point(&a, 1).unwrap(),
            1,
            &cfg,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::SingularJacobian(_)));
    }

    #[test]
    fn branches_for_single_harmonic() {
        let f = two_wave(0.0);
        let (a, b) = critical_points(&f);
        let cfg = ContinuationConfig::default();
        let grid = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
        let ell = continue_branch(&f, &a, 1, &grid, &cfg).unwrap();
        assert_eq!(ell.points.len(), 5);
        assert!(
            ell.classes().iter().all(|c| *c == StabilityClass::Elliptic),
            "{:?}",
            ell.classes()
        );
        assert_eq!(classify_branch(&ell).all_agree, Some(true));

        let uns = continue_branch(&f, &b, 1, &grid, &cfg).unwrap();
        assert_eq!(uns.points.len(), 5);
        for p in &uns.points {
            assert!(p.class().is_unstable());
            assert!(
                p.monodromy_summary
                    .real_multiplier_excess(cfg.spectral.tol_eig)
                    .unwrap()
                    > 1e-5
            );
        }
        assert_eq!(classify_branch(&uns).all_agree, Some(true));

        // convergence to the seed and to the identity spectrum as ε → 0
        let seed = PoincareState::new(a.lambda, 1.0, a.eta, a.xi);
        let d: Vec<f64> = ell
            .points
            .iter()
            .take(3)
            .map(|p| p.poincare0.distance(&seed))
            .collect();
        assert!(d[0] < d[1] && d[1] < d[2], "{d:?}");
        let m: Vec<f64> = ell
            .points
            .iter()
            .map(|p| p.monodromy_summary.max_distance_from_one())
            .collect();
        assert!(m.windows(2).all(|w| w[0] < w[1]), "{m:?}");
        assert!(ell.points.iter().all(|p| p.winding == 1));
    }

    #[test]
    fn above_threshold_both_unstable() {
        let _ = env_logger::builder().is_test(true).try_init();
        let f = two_wave(5.0);
        let (a, b) = critical_points(&f);
        let cfg = ContinuationConfig::default();
        let grid = [1e-3, 3e-3];
        for cp in [&a, &b] {
            assert_eq!(cp.predicted_class, PredictedClass::Unstable);
            let br = continue_branch(&f, cp, 1, &grid, &cfg).unwrap();
            assert!(br.classes().iter().all(|c| c.is_unstable()));
            assert_eq!(classify_branch(&br).all_agree, Some(true));
        }
    }

    #[test]
    fn expansion_of_elliptic_branch() {
        let f = two_wave(0.0);
        let (a, _) = critical_points(&f);
        let cfg = ContinuationConfig::default();
        let br = continue_branch(&f, &a, 1, &default_eps_grid(), &cfg).unwrap();
        let fit = expansion_check(&br, &a.hessian_matrix(), &cfg).unwrap();
        assert!((fit.det_slope - 3.0).abs() < 0.1, "{fit:?}");
        assert!(fit.det_coefficient > 0.0);
        assert!(fit.trace_relative_error < 0.05, "{fit:?}");
        assert!((fit.trace_coefficient_predicted + 12.0 * PI * PI).abs() < 1e-9);
        assert!(fit.det_relative_error < 0.1, "{fit:?}");
    }

    #[test]
    fn expansion_needs_points() {
        let f = two_wave(0.0);
        let (a, _) = critical_points(&f);
        let cfg = ContinuationConfig::default();
        let br = continue_branch(&f, &a, 1, &[1e-3, 2e-3, 3e-3], &cfg).unwrap();
        assert!(matches!(
            expansion_check(&br, &a.hessian_matrix(), &cfg),
            Err(Error::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn branch_exports() {
        let f = two_wave(0.0);
        let (a, _) = critical_points(&f);
        let br = continue_branch(&f, &a, 1, &[1e-3], &ContinuationConfig::default()).unwrap();
        let mut buf = Vec::new();
        br.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let p = &v["points"][0];
        for key in [
            "eps",
            "s0",
            "poincare0",
            "residual",
            "class",
            "eigenvalues",
            "trace",
            "det_s_minus_i",
        ] {
            assert!(!p[key].is_null(), "missing {key}");
        }
        let mut csv = Vec::new();
        br.write_summary_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
    }
}
