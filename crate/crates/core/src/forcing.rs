//! Time-periodic perturbations `U(t, x)`.
//!
//! A linear forcing `U(t, x) = −⟨p(t), x⟩` is stored through the Fourier
//! coefficients of `p(t) = Σ cₙ e^{int}`, read as a planar vector through
//! `ℝ² ≅ ℂ`. No realness constraint `c₋ₙ = conj(cₙ)` is imposed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Finitely supported map `n ↦ cₙ`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FourierSpectrum {
    coefficients: BTreeMap<i64, Complex64>,
}

impl FourierSpectrum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (i64, Complex64)>) -> Self {
        let mut s = Self::new();
        for (n, c) in terms {
            *s.coefficients.entry(n).or_default() += c;
        }
        s
    }

    /// `e^{iNt} + a e^{−iNt}`.
    pub fn two_wave(n: i64, a: Complex64) -> Self {
        Self::from_terms([(n, Complex64::new(1.0, 0.0)), (-n, a)])
    }

    pub fn with(mut self, n: i64, c: Complex64) -> Self {
        *self.coefficients.entry(n).or_default() += c;
        self
    }

    pub fn coefficient(&self, n: i64) -> Complex64 {
        self.coefficients.get(&n).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coefficients.iter().map(|(n, c)| (*n, *c))
    }

    pub fn max_abs(&self) -> f64 {
        self.coefficients
            .values()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }

    /// Largest `|n|` with a nonzero coefficient.
    pub fn degree(&self) -> i64 {
        self.iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(n, _)| n.abs())
            .max()
            .unwrap_or(0)
    }

    /// `p(t) = Σ cₙ e^{int}`.
    pub fn eval(&self, t: f64) -> Complex64 {
        self.iter()
            .map(|(n, c)| c * Complex64::from_polar(1.0, n as f64 * t))
            .sum()
    }

    /// Spectrum of `t ↦ p(t + s)`.
    pub fn shifted(&self, s: f64) -> Self {
        Self::from_terms(
            self.iter()
                .map(|(n, c)| (n, c * Complex64::from_polar(1.0, n as f64 * s))),
        )
    }

    /// Spectrum of `t ↦ p(−t)`.
    pub fn time_reversed(&self) -> Self {
        Self::from_terms(self.iter().map(|(n, c)| (-n, c)))
    }

    /// Drop coefficients with `|cₙ| ≤ tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self::from_terms(self.iter().filter(|(_, c)| c.norm() > tol))
    }
}

/// Uniform-grid discrete Fourier coefficients `cₙ`, `|n| ≤ n_max`.
///
/// Exact to rounding for trigonometric polynomials of degree at most `n_max`.
pub fn fourier_analyze(
    p: impl Fn(f64) -> Complex64,
    n_max: usize,
    n_samples: usize,
) -> Result<FourierSpectrum> {
    if n_samples < 4 * n_max + 4 {
        return Err(Error::InvalidInput(format!(
            "need at least {} samples for n_max = {n_max}, got {n_samples}",
            4 * n_max + 4
        )));
    }
    let samples: Vec<(f64, Complex64)> = (0..n_samples)
        .map(|k| {
            let t = TAU * k as f64 / n_samples as f64;
            (t, p(t))
        })
        .collect();
    let n_max = n_max as i64;
    let inv = 1.0 / n_samples as f64;
    Ok(FourierSpectrum::from_terms((-n_max..=n_max).map(|n| {
        let c: Complex64 = samples
            .iter()
            .map(|(t, v)| v * Complex64::from_polar(1.0, -(n as f64) * t))
            .sum();
        (n, c * inv)
    })))
}

/// A `2π`-periodic potential with first and second `x`-derivatives.
///
/// Implementations are evaluated concurrently and must be thread-safe.
pub trait Potential: Send + Sync {
    fn value(&self, t: f64, x: [f64; 2]) -> f64;
    fn gradient(&self, t: f64, x: [f64; 2]) -> [f64; 2];
    fn hessian(&self, t: f64, x: [f64; 2]) -> [[f64; 2]; 2];
    fn name(&self) -> &str;
}

/// `U`, `∇ₓU` and `Dₓ²U` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialJet {
    pub value: f64,
    pub gradient: [f64; 2],
    pub hessian: [[f64; 2]; 2],
}

#[derive(Clone)]
pub enum ForcingModel {
    Linear(FourierSpectrum),
    General(Arc<dyn Potential>),
}

impl fmt::Debug for ForcingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForcingModel::Linear(s) => f.debug_tuple("Linear").field(s).finish(),
            ForcingModel::General(p) => f.debug_tuple("General").field(&p.name()).finish(),
        }
    }
}

impl ForcingModel {
    pub fn linear(spectrum: FourierSpectrum) -> Self {
        ForcingModel::Linear(spectrum)
    }

    pub fn spectrum(&self) -> Option<&FourierSpectrum> {
        match self {
            ForcingModel::Linear(s) => Some(s),
            ForcingModel::General(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ForcingModel::Linear(s) if s.is_zero())
    }

    /// Model of `t ↦ U(−t, x)`.
    pub fn time_reversed(&self) -> Self {
        match self {
            ForcingModel::Linear(s) => ForcingModel::Linear(s.time_reversed()),
            ForcingModel::General(p) => ForcingModel::General(Arc::new(Reversed(p.clone()))),
        }
    }

    /// Gradient only; the hot path of the integrator.
    pub fn gradient(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        match self {
            ForcingModel::Linear(s) => {
                let p = s.eval(t);
                [-p.re, -p.im]
            }
            ForcingModel::General(u) => u.gradient(t.rem_euclid(TAU), x),
        }
    }
}

struct Reversed(Arc<dyn Potential>);

impl Potential for Reversed {
    fn value(&self, t: f64, x: [f64; 2]) -> f64 {
        self.0.value((-t).rem_euclid(TAU), x)
    }
    fn gradient(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        self.0.gradient((-t).rem_euclid(TAU), x)
    }
    fn hessian(&self, t: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
        self.0.hessian((-t).rem_euclid(TAU), x)
    }
    fn name(&self) -> &str {
        self.0.name()
    }
}

/// `p(t)` of a linear forcing.
pub fn eval_forcing(f: &ForcingModel, t: f64) -> Result<Complex64> {
    match f {
        ForcingModel::Linear(s) => Ok(s.eval(t)),
        ForcingModel::General(_) => Err(Error::WrongKind),
    }
}

pub fn eval_potential(f: &ForcingModel, t: f64, x: [f64; 2]) -> PotentialJet {
    match f {
        ForcingModel::Linear(s) => {
            let p = s.eval(t);
            PotentialJet {
                value: -(p.re * x[0] + p.im * x[1]),
                gradient: [-p.re, -p.im],
                hessian: [[0.0; 2]; 2],
            }
        }
        ForcingModel::General(u) => {
            let t = t.rem_euclid(TAU);
            PotentialJet {
                value: u.value(t, x),
                gradient: u.gradient(t, x),
                hessian: u.hessian(t, x),
            }
        }
    }
}

/// `U = k|x|²/2`.
#[derive(Debug, Clone, Copy)]
pub struct IsotropicQuadratic {
    pub k: f64,
}

impl Potential for IsotropicQuadratic {
    fn value(&self, _t: f64, x: [f64; 2]) -> f64 {
        0.5 * self.k * (x[0] * x[0] + x[1] * x[1])
    }
    fn gradient(&self, _t: f64, x: [f64; 2]) -> [f64; 2] {
        [self.k * x[0], self.k * x[1]]
    }
    fn hessian(&self, _t: f64, _x: [f64; 2]) -> [[f64; 2]; 2] {
        [[self.k, 0.0], [0.0, self.k]]
    }
    fn name(&self) -> &str {
        "isotropic_quadratic"
    }
}

/// `U = (k/2)⟨x, d(t)⟩²` with the direction `d(t) = (cos mt, sin mt)` rotating
/// `m` times per period.
#[derive(Debug, Clone, Copy)]
pub struct RotatingTidal {
    pub k: f64,
    pub m: i64,
}

impl RotatingTidal {
    fn dir(&self, t: f64) -> [f64; 2] {
        let (s, c) = (self.m as f64 * t).sin_cos();
        [c, s]
    }
}

impl Potential for RotatingTidal {
    fn value(&self, t: f64, x: [f64; 2]) -> f64 {
        let d = self.dir(t);
        let proj = x[0] * d[0] + x[1] * d[1];
        0.5 * self.k * proj * proj
    }
    fn gradient(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let d = self.dir(t);
        let proj = x[0] * d[0] + x[1] * d[1];
        [self.k * proj * d[0], self.k * proj * d[1]]
    }
    fn hessian(&self, t: f64, _x: [f64; 2]) -> [[f64; 2]; 2] {
        let d = self.dir(t);
        [
            [self.k * d[0] * d[0], self.k * d[0] * d[1]],
            [self.k * d[1] * d[0], self.k * d[1] * d[1]],
        ]
    }
    fn name(&self) -> &str {
        "rotating_tidal"
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermSpec {
    pub n: i64,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Config-file form of a forcing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ForcingSpec {
    Fourier {
        terms: Vec<TermSpec>,
    },
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
}

impl ForcingSpec {
    pub fn from_spectrum(s: &FourierSpectrum) -> Self {
        ForcingSpec::Fourier {
            terms: s
                .iter()
                .map(|(n, c)| TermSpec {
                    n,
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }

    pub fn build(&self) -> Result<ForcingModel> {
        match self {
            ForcingSpec::Fourier { terms } => {
                Ok(ForcingModel::Linear(FourierSpectrum::from_terms(
                    terms.iter().map(|t| (t.n, Complex64::new(t.re, t.im))),
                )))
            }
            ForcingSpec::Builtin { name, params } => {
                let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
                match name.as_str() {
                    "isotropic_quadratic" => {
                        Ok(ForcingModel::General(Arc::new(IsotropicQuadratic {
                            k: get("k", 1.0),
                        })))
                    }
                    "rotating_tidal" => {
                        let m = get("m", 1.0);
                        if m.fract() != 0.0 {
                            return Err(Error::Config("rotating_tidal needs an integer m".into()));
                        }
                        Ok(ForcingModel::General(Arc::new(RotatingTidal {
                            k: get("k", 1.0),
                            m: m as i64,
                        })))
                    }
                    other => Err(Error::Config(format!(
                        "unknown builtin potential {other:?}"
                    ))),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        let f = ForcingModel::linear(FourierSpectrum::from_terms([(1, c(1.0, 0.0))]));
        assert!((eval_forcing(&f, 0.0).unwrap() - 1.0).norm() < 1e-15);

        let a = 0.3;
        let f = ForcingModel::linear(FourierSpectrum::two_wave(1, c(a, 0.0)));
        assert!((eval_forcing(&f, FRAC_PI_2).unwrap() - c(0.0, 1.0 - a)).norm() < 1e-15);

        let f = ForcingModel::linear(FourierSpectrum::from_terms([(0, c(2.0, 1.0))]));
        for t in [0.0, 1.0, 5.0] {
            assert!((eval_forcing(&f, t).unwrap() - c(2.0, 1.0)).norm() < 1e-15);
        }

        let g = ForcingModel::General(Arc::new(IsotropicQuadratic { k: 1.0 }));
        assert_eq!(eval_forcing(&g, 0.0), Err(Error::WrongKind));
    }

    #[test]
    fn analyze_examples() {
        let s = fourier_analyze(
            |t| Complex64::from_polar(1.0, t) + 3.0 * Complex64::from_polar(1.0, -2.0 * t),
            4,
            32,
        )
        .unwrap();
        for (n, cn) in s.iter() {
            let want = match n {
                1 => c(1.0, 0.0),
                -2 => c(3.0, 0.0),
                _ => c(0.0, 0.0),
            };
            assert!((cn - want).norm() < 1e-12, "c_{n} = {cn}");
        }

        let s = fourier_analyze(|t| c(t.cos(), 0.0), 3, 16).unwrap();
        assert!((s.coefficient(1) - 0.5).norm() < 1e-14);
        assert!((s.coefficient(-1) - 0.5).norm() < 1e-14);

        // sin³t = (3 sin t − sin 3t)/4
        let s = fourier_analyze(|t| c(t.sin().powi(3), 0.0), 4, 64).unwrap();
        assert!((s.coefficient(1).norm() - 3.0 / 8.0).abs() < 1e-14);
        assert!((s.coefficient(3).norm() - 1.0 / 8.0).abs() < 1e-14);
        assert!((s.coefficient(1) + s.coefficient(-1)).norm() < 1e-14);

        assert!(fourier_analyze(|_| c(0.0, 0.0), 4, 8).is_err());
    }

    #[test]
    fn potential_examples() {
        let f = ForcingModel::linear(FourierSpectrum::from_terms([(1, c(1.0, 0.0))]));
        let j = eval_potential(&f, 0.0, [2.0, 0.0]);
        assert!((j.value + 2.0).abs() < 1e-15);
        assert_eq!(j.gradient, [-1.0, -0.0]);
        assert_eq!(j.hessian, [[0.0; 2]; 2]);

        let g = ForcingModel::General(Arc::new(IsotropicQuadratic { k: 1.0 }));
        let j = eval_potential(&g, 0.3, [0.5, -2.0]);
        assert_eq!(j.gradient, [0.5, -2.0]);
        assert_eq!(j.hessian, [[1.0, 0.0], [0.0, 1.0]]);

        // p(π/2) = i·1 + (−i)·4i = 4 + i
        let f = ForcingModel::linear(FourierSpectrum::from_terms([
            (1, c(1.0, 0.0)),
            (-1, c(0.0, 4.0)),
        ]));
        let j = eval_potential(&f, FRAC_PI_2, [0.0, 0.0]);
        assert!((j.gradient[0] + 4.0).abs() < 1e-14 && (j.gradient[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn general_potential_derivatives_match_differences() {
        let models: Vec<Box<dyn Potential>> = vec![
            Box::new(IsotropicQuadratic { k: 0.7 }),
            Box::new(RotatingTidal { k: 1.3, m: 2 }),
        ];
        let h = 1e-5;
        for u in &models {
            for &(t, x) in &[(0.3, [0.4, -1.1]), (2.0, [1.5, 0.2])] {
                let g = u.gradient(t, x);
                let hs = u.hessian(t, x);
                for k in 0..2 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[k] += h;
                    xm[k] -= h;
                    let fd = (u.value(t, xp) - u.value(t, xm)) / (2.0 * h);
                    assert!((fd - g[k]).abs() < 1e-6);
                    let (gp, gm) = (u.gradient(t, xp), u.gradient(t, xm));
                    for i in 0..2 {
                        assert!(((gp[i] - gm[i]) / (2.0 * h) - hs[i][k]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn time_is_periodic() {
        let g = ForcingModel::General(Arc::new(RotatingTidal { k: 1.0, m: 3 }));
        let a = eval_potential(&g, 0.4, [1.0, 0.5]);
        let b = eval_potential(&g, 0.4 + 4.0 * PI, [1.0, 0.5]);
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn shift_and_reverse() {
        let s =
            FourierSpectrum::from_terms([(1, c(1.0, 0.0)), (-1, c(0.2, 0.3)), (3, c(0.0, -1.0))]);
        let sh = s.shifted(0.7);
        assert!((sh.eval(0.2) - s.eval(0.9)).norm() < 1e-14);
        let rv = s.time_reversed();
        assert!((rv.eval(0.2) - s.eval(-0.2)).norm() < 1e-14);
    }

    #[test]
    fn spec_roundtrip_json() {
        let js = r#"{"type": "fourier", "terms": [{"n": 1, "re": 1.0, "im": 0.0}, {"n": -1, "re": 4.0}]}"#;
        let spec: ForcingSpec = serde_json::from_str(js).unwrap();
        let f = spec.build().unwrap();
        assert!((f.spectrum().unwrap().coefficient(-1) - 4.0).norm() < 1e-15);

        let js = r#"{"type": "builtin", "name": "rotating_tidal", "params": {"k": 2.0, "m": 1}}"#;
        let spec: ForcingSpec = serde_json::from_str(js).unwrap();
        assert!(matches!(spec.build().unwrap(), ForcingModel::General(_)));

        let js = r#"{"type": "builtin", "name": "nope"}"#;
        let spec: ForcingSpec = serde_json::from_str(js).unwrap();
        assert!(spec.build().is_err());
    }

    proptest::proptest! {
        #[test]
        fn analysis_inverts_synthesis(
            coeffs in proptest::collection::vec((-6i64..=6, -2.0f64..2.0, -2.0f64..2.0), 1..6)
        ) {
            let s = FourierSpectrum::from_terms(coeffs.iter().map(|&(n, re, im)| (n, c(re, im))));
            let back = fourier_analyze(|t| s.eval(t), 8, 64).unwrap();
            for n in -8..=8 {
                proptest::prop_assert!((back.coefficient(n) - s.coefficient(n)).norm() < 1e-12);
            }
        }
    }
}
