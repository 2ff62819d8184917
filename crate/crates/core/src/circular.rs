//! Closed-form analysis of linear forcing at circular orbits.
//!
//! With `p(t) = Σ cₙ e^{int}` and `x = Λ_N² e^{iλ}` on the equator, the
//! gradient of `γ_N` vanishes at `(λ, 0, 0)` iff
//! `Im(e^{−iλ}c_N) = 0` and `e^{−2iλ}c_{2N} = 3 conj(c₀)`.
//! On the linear manifold `c₀ = c_{2N} = 0` with `c_N ≠ 0` the two solutions
//! are `λ*` and `λ* + π`, `e^{iλ*} = c_N/|c_N|`, and
//! `D²γ_N(λ*, 0, 0) = diag(Λ_N²|c_N|, Λ_N M(p))`.

use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::angle;
use crate::averaging::{AveragedFunction, CriticalPoint, PredictedClass};
use crate::continuation::{
    classify_branch, continue_branch, observed_prediction_class, BranchVerdict, ContinuationConfig,
};
use crate::error::{Error, Result};
use crate::forcing::{ForcingModel, FourierSpectrum};

/// Relative tolerance on coefficient magnitudes, scaled by `max |cₙ|`.
pub const TOL_COEFF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquatorConditions {
    /// Condition `3|c₀| = |c_{2N}|` with `c₀ c_{2N} conj(c_N)² ≥ 0`.
    pub solvable: bool,
    /// `c₀ = c_N = c_{2N} = 0`: every equator point is critical.
    pub continuum: bool,
    /// `c_N = 0`, so only the second equation constrains `λ`.
    pub first_equation_vacuous: bool,
    /// Solutions in `[0, 2π)`; empty for a continuum.
    pub lambda_solutions: Vec<f64>,
}

fn coeff_tol(spectrum: &FourierSpectrum) -> f64 {
    TOL_COEFF * spectrum.max_abs().max(f64::MIN_POSITIVE)
}

fn check_n(n: i64) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidInput(format!(
            "circular analysis needs N ≥ 1, got {n}"
        )));
    }
    Ok(())
}

/// Solve the equator critical-point equations for `λ`.
pub fn equator_critical_conditions(
    spectrum: &FourierSpectrum,
    n: i64,
) -> Result<EquatorConditions> {
    check_n(n)?;
    let tol = coeff_tol(spectrum);
    let c0 = spectrum.coefficient(0);
    let cn = spectrum.coefficient(n);
    let c2n = spectrum.coefficient(2 * n);
    let product = c0 * c2n * cn.conj() * cn.conj();
    let scale = product.norm();
    let solvable = (3.0 * c0.norm() - c2n.norm()).abs() <= tol
        && product.im.abs() <= TOL_COEFF * scale
        && product.re >= -TOL_COEFF * scale;
    let vacuous = cn.norm() <= tol;
    let continuum = vacuous && c0.norm() <= tol && c2n.norm() <= tol;
    let lambda_solutions = if !solvable || continuum {
        Vec::new()
    } else {
        let base = if vacuous {
            // e^{2iλ} = c_{2N} / (3 conj c₀)
            0.5 * (c2n / (3.0 * c0.conj())).arg()
        } else {
            cn.arg()
        };
        let mut v = vec![angle::wrap(base), angle::wrap(base + PI)];
        v.sort_by(f64::total_cmp);
        v
    };
    Ok(EquatorConditions {
        solvable,
        continuum,
        first_equation_vacuous: vacuous,
        lambda_solutions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyPrediction {
    /// `+1` for `e^{i(λ*+Nt)}`, `−1` for `−e^{i(λ*+Nt)}`.
    pub sign: i8,
    pub base: String,
    pub lambda: f64,
    pub class: PredictedClass,
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircularReport {
    pub n: i64,
    pub c0: Complex64,
    pub c_n: Complex64,
    pub c_2n: Complex64,
    pub c_neg_n: Complex64,
    pub c_3n: Complex64,
    pub on_linear_manifold: bool,
    pub lambda_star: f64,
    pub lambda_n: f64,
    pub m_matrix: [[f64; 2]; 2],
    pub det_m: f64,
    /// `D²γ_N(λ*, 0, 0)`; the antipodal point carries its negation.
    pub hessian: [[f64; 3]; 3],
    pub family_predictions: Vec<FamilyPrediction>,
}

impl CircularReport {
    pub fn m(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.m_matrix[0][0],
            self.m_matrix[0][1],
            self.m_matrix[1][0],
            self.m_matrix[1][1],
        )
    }

    pub fn hessian_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, k| self.hessian[i][k])
    }

    /// Hessian at the family with the given sign.
    pub fn family_hessian(&self, sign: i8) -> Matrix3<f64> {
        let h = self.hessian_matrix();
        if sign < 0 {
            -h
        } else {
            h
        }
    }
}

/// `M(p)` from `c_N`, `c_{−N}`, `c_{3N}`.
pub fn m_of(cn: Complex64, cneg: Complex64, c3n: Complex64) -> Matrix2<f64> {
    let r = cn.norm();
    let a = cn * cneg / r;
    let b = 3.0 * cn.conj().powu(3) * c3n / r.powi(3);
    let x = a + b;
    let y = a - b;
    Matrix2::new(r + 0.25 * x.re, 0.25 * y.im, 0.25 * y.im, r - 0.25 * x.re)
}

fn sentence(sign: i8, n: i64, class: PredictedClass) -> String {
    let base = if sign > 0 {
        "+e^{i(λ*+Nt)}"
    } else {
        "−e^{i(λ*+Nt)}"
    };
    match class {
        PredictedClass::Elliptic => {
            format!("the family near {base} (N = {n}) is elliptic for small ε > 0")
        }
        PredictedClass::Unstable => {
            format!("the family near {base} (N = {n}) is unstable for small ε > 0")
        }
        PredictedClass::Inconclusive => {
            format!("det M(p) vanishes, no verdict for the family near {base} (N = {n})")
        }
    }
}

/// The circular report: `λ*`, `M(p)`, `D²γ_N(λ*,0,0)` and the two family
/// predictions.
pub fn m_matrix(spectrum: &FourierSpectrum, n: i64) -> Result<CircularReport> {
    check_n(n)?;
    let tol = coeff_tol(spectrum);
    let c0 = spectrum.coefficient(0);
    let cn = spectrum.coefficient(n);
    let c2n = spectrum.coefficient(2 * n);
    let cneg = spectrum.coefficient(-n);
    let c3n = spectrum.coefficient(3 * n);
    if c0.norm() > tol || c2n.norm() > tol {
        return Err(Error::OffManifold {
            c0: c0.norm(),
            c2n: c2n.norm(),
        });
    }
    if cn.norm() <= tol {
        return Err(Error::DegenerateEquator);
    }
    let lambda_n = (n as f64).powf(-1.0 / 3.0);
    let m = m_of(cn, cneg, c3n);
    let det_m = m.determinant();
    let mut hessian = [[0.0; 3]; 3];
    hessian[0][0] = lambda_n * lambda_n * cn.norm();
    for i in 0..2 {
        for k in 0..2 {
            hessian[i + 1][k + 1] = lambda_n * m[(i, k)];
        }
    }
    let det_tol = TOL_COEFF * cn.norm_sqr();
    let (first, second) = if det_m > det_tol {
        (PredictedClass::Elliptic, PredictedClass::Unstable)
    } else if det_m < -det_tol {
        (PredictedClass::Unstable, PredictedClass::Unstable)
    } else {
        (PredictedClass::Inconclusive, PredictedClass::Inconclusive)
    };
    let lambda_star = angle::wrap(cn.arg());
    let family = |sign: i8, class| FamilyPrediction {
        sign,
        base: if sign > 0 {
            "+e^{i(λ*+Nt)}".into()
        } else {
            "−e^{i(λ*+Nt)}".into()
        },
        lambda: if sign > 0 {
            lambda_star
        } else {
            angle::wrap(lambda_star + PI)
        },
        class,
        sentence: sentence(sign, n, class),
    };
    Ok(CircularReport {
        n,
        c0,
        c_n: cn,
        c_2n: c2n,
        c_neg_n: cneg,
        c_3n: c3n,
        on_linear_manifold: true,
        lambda_star,
        lambda_n,
        m_matrix: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        det_m,
        hessian,
        family_predictions: vec![family(1, first), family(-1, second)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheck {
    pub sign: i8,
    pub predicted: PredictedClass,
    /// Largest entrywise gap between the quadrature and closed-form Hessians.
    pub hessian_max_diff: f64,
    pub hessian_ok: bool,
    pub verdict: Option<BranchVerdict>,
    pub branch_error: Option<String>,
    /// Whether every observed class matches the prediction; `None` when
    /// the prediction is inconclusive or no branch was produced.
    pub classes_match: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub families: Vec<FamilyCheck>,
    pub hessian_tol: f64,
    /// No Hessian mismatch and no class mismatch.
    pub ok: bool,
}

pub const HESSIAN_MATCH_TOL: f64 = 1e-6;

/// Compare the closed-form Hessians with the averaging engine and, when
/// `eps_grid` is nonempty, the predicted families with continued branches.
pub fn cross_validate(
    report: &CircularReport,
    f: &ForcingModel,
    eps_grid: &[f64],
    cfg: &ContinuationConfig,
) -> Result<CrossValidation> {
    let avg = AveragedFunction::new(report.n, f.clone())?;
    let check = |fam: &FamilyPrediction| -> Result<FamilyCheck> {
        let (g, h) = avg.gamma_gradient_hessian(fam.lambda, 0.0, 0.0)?;
        let want = report.family_hessian(fam.sign);
        let diff = (h - want).abs().max();
        let hessian_ok = diff <= HESSIAN_MATCH_TOL * want.abs().max().max(1.0);
        let mut out = FamilyCheck {
            sign: fam.sign,
            predicted: fam.class,
            hessian_max_diff: diff,
            hessian_ok,
            verdict: None,
            branch_error: None,
            classes_match: None,
        };
        if eps_grid.is_empty() {
            return Ok(out);
        }
        let cp = CriticalPoint::new(Vector3::new(fam.lambda, 0.0, 0.0), g, h);
        match continue_branch(f, &cp, report.n, eps_grid, cfg) {
            Ok(branch) => {
                let verdict = classify_branch(&branch);
                out.classes_match = (fam.class != PredictedClass::Inconclusive).then(|| {
                    !branch.truncated
                        && verdict
                            .points
                            .iter()
                            .all(|p| observed_prediction_class(p.observed) == fam.class)
                });
                out.verdict = Some(verdict);
            }
            Err(e) => out.branch_error = Some(e.to_string()),
        }
        Ok(out)
    };
    let (a, b) = rayon::join(
        || check(&report.family_predictions[0]),
        || check(&report.family_predictions[1]),
    );
    let families = vec![a?, b?];
    let ok = families.iter().all(|c| {
        c.hessian_ok
            && c.classes_match != Some(false)
            && (c.predicted == PredictedClass::Inconclusive
                || eps_grid.is_empty()
                || c.verdict.is_some())
    });
    Ok(CrossValidation {
        families,
        hessian_tol: HESSIAN_MATCH_TOL,
        ok,
    })
}
