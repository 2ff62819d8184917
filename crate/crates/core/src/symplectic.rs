//! Spectral analysis of real 4×4 symplectic matrices near a parabolic matrix.
//!
//! Coordinates are ordered `(q1, q2, p1, p2)` so that the symplectic form is
//! `J = [[0, I], [-I, 0]]`. For Cartesian states this is `(x1, x2, y1, y2)`;
//! for Poincaré states it is `(λ, η, Λ, ξ)`.
//!
//! The trace/determinant criterion (`det(S - I) > 0` and `tr S < 4` iff
//! elliptic) only holds in an unquantified neighborhood of the parabolic
//! matrix, so [`classify_local`] always cross-checks it against the spectrum.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat4 = Matrix4<f64>;

/// Standard symplectic matrix `J = [[0, I], [-I, 0]]`.
pub fn j4() -> Mat4 {
    let mut j = Mat4::zeros();
    j[(0, 2)] = 1.0;
    j[(1, 3)] = 1.0;
    j[(2, 0)] = -1.0;
    j[(3, 1)] = -1.0;
    j
}

/// Operator 2-norm of `SᵀJS − J`.
pub fn symplectic_defect(s: &Mat4) -> f64 {
    let j = j4();
    let d = s.transpose() * j * s - j;
    d.singular_values().max()
}

/// Tolerances shared by pairing and classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralTolerances {
    /// Maximum accepted `‖SᵀJS − J‖₂`.
    pub tol_symp: f64,
    /// Allowed deviation of `|μ|` from 1 (and minimum distance from ±1).
    pub tol_eig: f64,
    /// Maximum `|μᵢμⱼ − 1|` for an accepted reciprocal pair.
    pub tol_pair: f64,
    /// `|det(S − I)|` below this is reported as degenerate.
    pub tol_det: f64,
}

impl Default for SpectralTolerances {
    fn default() -> Self {
        Self {
            tol_symp: 1e-8,
            tol_eig: 1e-6,
            tol_pair: 1e-6,
            tol_det: 1e-10,
        }
    }
}

/// A real 4×4 matrix together with its measured symplectic defect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monodromy4 {
    entries: Mat4,
    symplectic_defect: f64,
}

impl Monodromy4 {
    pub fn new(entries: Mat4) -> Self {
        let symplectic_defect = symplectic_defect(&entries);
        Self {
            entries,
            symplectic_defect,
        }
    }

    pub fn from_row_major(values: &[f64; 16]) -> Self {
        Self::new(Mat4::from_row_slice(values))
    }

    pub fn entries(&self) -> &Mat4 {
        &self.entries
    }

    pub fn symplectic_defect(&self) -> f64 {
        self.symplectic_defect
    }

    pub fn is_symplectic(&self, tol_symp: f64) -> bool {
        self.symplectic_defect <= tol_symp
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                out[4 * i + j] = self.entries[(i, j)];
            }
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn det_minus_identity(&self) -> f64 {
        (self.entries - Mat4::identity()).determinant()
    }

    pub fn eigenvalues(&self) -> [Complex64; 4] {
        let ev = self.entries.complex_eigenvalues();
        [ev[0], ev[1], ev[2], ev[3]]
    }
}

impl Serialize for Monodromy4 {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        self.to_row_major().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Monodromy4 {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let v: Vec<f64> = Vec::deserialize(deserializer)?;
        let arr: [f64; 16] = v
            .try_into()
            .map_err(|v: Vec<f64>| serde::de::Error::invalid_length(v.len(), &"16 reals"))?;
        Ok(Self::from_row_major(&arr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabilityClass {
    Elliptic,
    Hyperbolic,
    MixedEllipticHyperbolic,
    Degenerate,
    OutsideLocalChart,
}

impl StabilityClass {
    /// Hyperbolic and mixed classes both carry a multiplier off the unit circle.
    pub fn is_unstable(self) -> bool {
        matches!(self, Self::Hyperbolic | Self::MixedEllipticHyperbolic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Elliptic => "Elliptic",
            Self::Hyperbolic => "Hyperbolic",
            Self::MixedEllipticHyperbolic => "MixedEllipticHyperbolic",
            Self::Degenerate => "Degenerate",
            Self::OutsideLocalChart => "OutsideLocalChart",
        }
    }
}

impl std::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// `μ₁ + μ₃`; real up to rounding whenever the spectrum lies in `S¹ ∪ ℝ`.
    pub delta1: Complex64,
    /// `μ₂ + μ₄`.
    pub delta2: Complex64,
    pub trace: f64,
    pub det_s_minus_i: f64,
    /// Ordered `[μ₁, μ₂, μ₃, μ₄]` with `μ₁μ₃ = μ₂μ₄ = 1`.
    pub eigenvalues: [Complex64; 4],
    pub pairing_residual: f64,
    pub symplectic_defect: f64,
    pub class: StabilityClass,
}

impl SpectralSummary {
    pub fn deltas_real(&self, tol: f64) -> bool {
        self.delta1.im.abs() <= tol && self.delta2.im.abs() <= tol
    }

    pub fn max_modulus_deviation(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|m| (m.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_distance_from_one(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|m| (m - 1.0).norm())
            .fold(0.0, f64::max)
    }

    /// Largest real multiplier modulus minus one, if any multiplier is real.
    pub fn real_multiplier_excess(&self, tol_eig: f64) -> Option<f64> {
        self.eigenvalues
            .iter()
            .filter(|m| m.im.abs() <= tol_eig)
            .map(|m| m.norm() - 1.0)
            .reduce(f64::max)
    }
}

// The three perfect matchings of four eigenvalues.
const MATCHINGS: [[(usize, usize); 2]; 3] = [[(0, 1), (2, 3)], [(0, 2), (1, 3)], [(0, 3), (1, 2)]];

/// Group the spectrum into reciprocal pairs and form `Δ₁`, `Δ₂`.
///
/// The class field of the returned summary is provisional
/// ([`StabilityClass::Degenerate`]); use [`classify_local`] for a verdict.
pub fn eigen_pairing(s: &Monodromy4, tol: &SpectralTolerances) -> Result<SpectralSummary> {
    if !s.is_symplectic(tol.tol_symp) {
        return Err(Error::InvalidInput(format!(
            "matrix is not symplectic (defect {:.3e} > {:.1e})",
            s.symplectic_defect, tol.tol_symp
        )));
    }
    let ev = s.eigenvalues();
    let residual = |a: usize, b: usize| (ev[a] * ev[b] - 1.0).norm();

    let (best, best_res) = MATCHINGS
        .iter()
        .map(|m| (m, residual(m[0].0, m[0].1).max(residual(m[1].0, m[1].1))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three matchings");
    if best_res > tol.tol_pair {
        return Err(Error::PairingAmbiguous { residual: best_res });
    }

    // Inside each pair put the member outside (or on) the unit circle first,
    // ties broken by nonnegative imaginary part.
    let order_pair = |(a, b): (usize, usize)| -> (Complex64, Complex64) {
        let key = |z: Complex64| (z.norm() - 1.0, z.im);
        let (ka, kb) = (key(ev[a]), key(ev[b]));
        let a_first = if (ka.0 - kb.0).abs() > tol.tol_eig {
            ka.0 > kb.0
        } else {
            ka.1 >= kb.1
        };
        if a_first {
            (ev[a], ev[b])
        } else {
            (ev[b], ev[a])
        }
    };
    let mut pairs = [order_pair(best[0]), order_pair(best[1])];
    pairs.sort_by(|p, q| (p.0 + p.1).re.total_cmp(&(q.0 + q.1).re));

    let [(m1, m3), (m2, m4)] = pairs;
    Ok(SpectralSummary {
        delta1: m1 + m3,
        delta2: m2 + m4,
        trace: s.trace(),
        det_s_minus_i: s.det_minus_identity(),
        eigenvalues: [m1, m2, m3, m4],
        pairing_residual: best_res,
        symplectic_defect: s.symplectic_defect,
        class: StabilityClass::Degenerate,
    })
}

/// Verdict of the trace/determinant criterion alone.
pub fn trace_det_verdict(det_s_minus_i: f64, trace: f64, tol_det: f64) -> StabilityClass {
    if det_s_minus_i.abs() < tol_det {
        StabilityClass::Degenerate
    } else if det_s_minus_i < 0.0 {
        StabilityClass::MixedEllipticHyperbolic
    } else if trace < 4.0 {
        StabilityClass::Elliptic
    } else if trace > 4.0 {
        StabilityClass::Hyperbolic
    } else {
        StabilityClass::Degenerate
    }
}

/// Verdict read directly off the eigenvalues, `None` when the spectrum fits no
/// class (a complex quartet off the circle, or a multiplier at ±1).
pub fn spectral_verdict(eigenvalues: &[Complex64; 4], tol_eig: f64) -> Option<StabilityClass> {
    let near_pm_one = |m: &Complex64| (m - 1.0).norm() <= tol_eig || (m + 1.0).norm() <= tol_eig;
    if eigenvalues.iter().any(near_pm_one) {
        return None;
    }
    let on_circle = |m: &Complex64| (m.norm() - 1.0).abs() <= tol_eig;
    let real_off = |m: &Complex64| m.im.abs() <= tol_eig && !on_circle(m);
    let n_circle = eigenvalues.iter().filter(|m| on_circle(m)).count();
    let n_real = eigenvalues.iter().filter(|m| real_off(m)).count();
    match (n_circle, n_real) {
        (4, 0) => Some(StabilityClass::Elliptic),
        (0, 4) => Some(StabilityClass::Hyperbolic),
        (2, 2) => Some(StabilityClass::MixedEllipticHyperbolic),
        _ => None,
    }
}

/// Local stability classification near the parabolic matrix.
///
/// `chart_radius` is the caller's estimate of the neighborhood size; it does
/// not influence the verdict.
pub fn classify_local(
    s: &Monodromy4,
    chart_radius: f64,
    tol: &SpectralTolerances,
) -> Result<SpectralSummary> {
    let mut summary = eigen_pairing(s, tol)?;
    let by_trace = trace_det_verdict(summary.det_s_minus_i, summary.trace, tol.tol_det);
    let by_spectrum = spectral_verdict(&summary.eigenvalues, tol.tol_eig);
    summary.class = match (by_trace, by_spectrum) {
        (StabilityClass::Degenerate, _) => StabilityClass::Degenerate,
        (t, Some(sp)) if t == sp => t,
        _ => StabilityClass::OutsideLocalChart,
    };
    log::debug!(
        "classify_local: chart_radius={chart_radius:.3e} trace-verdict={by_trace} spectral-verdict={by_spectrum:?} -> {}",
        summary.class
    );
    Ok(summary)
}

/// The parabolic matrix `[[I, T], [0, I]]` with `T = diag(τ, 0)`.
pub fn parabolic(tau: f64) -> Mat4 {
    let mut p = Mat4::identity();
    p[(0, 2)] = tau;
    p
}

fn block(a: Matrix2<f64>, b: Matrix2<f64>, c: Matrix2<f64>, d: Matrix2<f64>) -> Mat4 {
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(&b);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&c);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(&d);
    m
}

/// `[[A, 0], [0, A⁻ᵀ]]`, symplectic for any invertible `A`.
pub fn linear_lift(a: Matrix2<f64>) -> Option<Mat4> {
    let a_inv_t = a.try_inverse()?.transpose();
    Some(block(a, Matrix2::zeros(), Matrix2::zeros(), a_inv_t))
}

/// `[[I, B], [0, I]]` with `B` symmetric (only the upper triangle is read).
pub fn upper_shear(b11: f64, b12: f64, b22: f64) -> Mat4 {
    let b = Matrix2::new(b11, b12, b12, b22);
    block(
        Matrix2::identity(),
        b,
        Matrix2::zeros(),
        Matrix2::identity(),
    )
}

/// `[[I, 0], [C, I]]` with `C` symmetric.
pub fn lower_shear(c11: f64, c12: f64, c22: f64) -> Mat4 {
    let c = Matrix2::new(c11, c12, c12, c22);
    block(
        Matrix2::identity(),
        Matrix2::zeros(),
        c,
        Matrix2::identity(),
    )
}

/// Independent rotations by `theta1` in the `(q1, p1)` plane and by `theta2`
/// in the `(q2, p2)` plane. Gives `Δᵢ = 2 cos θᵢ`.
pub fn rotation_pair(theta1: f64, theta2: f64) -> Mat4 {
    let mut m = Mat4::zeros();
    for (k, th) in [(0usize, theta1), (1usize, theta2)] {
        let (s, c) = th.sin_cos();
        m[(k, k)] = c;
        m[(k, k + 2)] = s;
        m[(k + 2, k)] = -s;
        m[(k + 2, k + 2)] = c;
    }
    m
}

fn q_eps(eps: f64) -> (Mat4, Mat4) {
    let a = Matrix2::new(1.0, 0.0, 0.0, eps);
    let a_inv = Matrix2::new(1.0, 0.0, 0.0, 1.0 / eps);
    let m = Matrix2::new(0.0, 0.0, 0.0, 1.0);
    let q = block(a, m, Matrix2::zeros(), a_inv);
    let q_inv = block(a_inv, -m, Matrix2::zeros(), a);
    (q, q_inv)
}

/// Matrix `S_ε = Q_ε B_ε Q_ε⁻¹`: satisfies the trace criterion yet has the
/// spectrum `{1 ± iε, (1 ± iε)⁻¹}` off the unit circle.
pub fn remark_one(eps: f64) -> Mat4 {
    let (q, q_inv) = q_eps(eps);
    let c = Matrix2::new(1.0, eps, -eps, 1.0);
    let c_inv = c.try_inverse().expect("det C = 1 + eps^2");
    let b = block(c.transpose(), Matrix2::zeros(), Matrix2::zeros(), c_inv);
    q * b * q_inv
}

/// Limit of [`remark_one`] as `ε → 0`: `[[βᵀ, 0], [0, β⁻¹]]`, `β = [[1, 0], [-1, 1]]`.
pub fn remark_one_limit() -> Mat4 {
    let beta = Matrix2::new(1.0, 0.0, -1.0, 1.0);
    block(
        beta.transpose(),
        Matrix2::zeros(),
        Matrix2::zeros(),
        beta.try_inverse().expect("unimodular"),
    )
}

/// Elliptic but non-diagonalizable matrix `ℰ_ε = Q_ε E_ε Q_ε⁻¹` with
/// `E_ε = [[R_ε, T], [0, R_ε]]`, `R_ε` the rotation by `ε²`, `T = diag(τ, −τ)`.
pub fn remark_two(eps: f64, tau: f64) -> Mat4 {
    let (q, q_inv) = q_eps(eps);
    let (s, c) = (eps * eps).sin_cos();
    let r = Matrix2::new(c, -s, s, c);
    let t = Matrix2::new(tau, 0.0, 0.0, -tau);
    let e = block(r, t, Matrix2::zeros(), r);
    q * e * q_inv
}

/// `[S_ε, ℰ_ε, P_*]` for the given `ε ≠ 0` and `τ`.
pub fn make_remark_fixtures(eps: f64, tau: f64) -> Result<Vec<Monodromy4>> {
    if eps == 0.0 || !eps.is_finite() {
        return Err(Error::InvalidInput("fixture eps must be nonzero".into()));
    }
    Ok(vec![
        Monodromy4::new(remark_one(eps)),
        Monodromy4::new(remark_two(eps, tau)),
        Monodromy4::new(parabolic(tau)),
    ])
}
