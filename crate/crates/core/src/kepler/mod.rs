//! Coordinate charts of the planar Kepler problem.
//!
//! * Cartesian `(x, y)` with `x` the position and `y` the velocity.
//! * Astronomical `(a, e, l, g)`: semi-major axis, eccentricity, mean anomaly,
//!   argument of pericenter.
//! * Delaunay `(l, L, g, G)` with `L = √a`, `G = √(a(1 − e²))`.
//! * Poincaré `(λ, Λ, η, ξ)` with `λ = l + g`, `Λ = L`, `η = √(2H) sin h`,
//!   `ξ = √(2H) cos h`, `h = −g`, `H = L − G`.
//!
//! Gravitational units are used throughout (`GM = 1`), so the orbit with
//! `Λ = 1` on the circular locus has period `2π`.

mod anomaly;
mod jets;

pub use anomaly::{solve_kepler, solve_kepler_default};
pub use jets::{poincare_jet_circular, radial_chart_jet, PoincareJet2, RadialJet};

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::angle;
use crate::error::{Error, Result};

/// Below this radius `√(η² + ξ²)` the closed circular formulas are used.
pub const TOL_CIRC: f64 = 1e-9;

/// Phase point `(x, y) ∈ (ℝ² ∖ {0}) × ℝ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl CartesianState {
    pub const fn new(x1: f64, x2: f64, y1: f64, y2: f64) -> Self {
        Self {
            x: [x1, x2],
            y: [y1, y2],
        }
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x[0], self.x[1], self.y[0], self.y[1]]
    }

    pub fn radius(&self) -> f64 {
        self.x[0].hypot(self.x[1])
    }

    /// Kepler energy `|y|²/2 − 1/|x|`.
    pub fn energy(&self) -> f64 {
        0.5 * (self.y[0] * self.y[0] + self.y[1] * self.y[1]) - 1.0 / self.radius()
    }

    /// Angular momentum `x₁y₂ − x₂y₁`.
    pub fn angular_momentum(&self) -> f64 {
        self.x[0] * self.y[1] - self.x[1] * self.y[0]
    }

    pub fn position(&self) -> Complex64 {
        Complex64::new(self.x[0], self.x[1])
    }

    pub fn velocity(&self) -> Complex64 {
        Complex64::new(self.y[0], self.y[1])
    }

    /// Membership in the positively oriented elliptic region.
    pub fn is_elliptic_positive(&self) -> bool {
        self.radius() > 0.0 && self.energy() < 0.0 && self.angular_momentum() > 0.0
    }

    pub fn distance(&self, other: &Self) -> f64 {
        let (a, b) = (self.to_array(), other.to_array());
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AstroCoords {
    pub a: f64,
    pub e: f64,
    pub l: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelaunayCoords {
    pub l: f64,
    pub big_l: f64,
    pub g: f64,
    pub big_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareState {
    pub lambda: f64,
    pub big_lambda: f64,
    pub eta: f64,
    pub xi: f64,
}

impl PoincareState {
    pub const fn new(lambda: f64, big_lambda: f64, eta: f64, xi: f64) -> Self {
        Self {
            lambda,
            big_lambda,
            eta,
            xi,
        }
    }

    /// `η² + ξ²`.
    pub fn rho2(&self) -> f64 {
        self.eta * self.eta + self.xi * self.xi
    }

    pub fn in_domain(&self) -> bool {
        self.big_lambda > 0.0 && self.rho2() < 2.0 * self.big_lambda
    }

    /// Components in symplectic order `(λ, η, Λ, ξ)`.
    pub fn to_symplectic(self) -> [f64; 4] {
        [self.lambda, self.eta, self.big_lambda, self.xi]
    }

    pub fn from_symplectic(v: [f64; 4]) -> Self {
        Self::new(v[0], v[2], v[1], v[3])
    }

    pub fn eccentricity(&self) -> f64 {
        let r2 = self.rho2();
        (r2 * (1.0 / self.big_lambda - r2 / (4.0 * self.big_lambda * self.big_lambda)))
            .max(0.0)
            .sqrt()
    }

    /// Wrap-aware distance in the product metric.
    pub fn distance(&self, other: &Self) -> f64 {
        let dl = angle::dist(self.lambda, other.lambda);
        let d = [
            dl,
            self.big_lambda - other.big_lambda,
            self.eta - other.eta,
            self.xi - other.xi,
        ];
        d.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn rotate(g: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = g.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Position and velocity from astronomical elements.
pub fn astro_to_cartesian(c: &AstroCoords) -> Result<CartesianState> {
    if !(c.a > 0.0) || !(0.0..1.0).contains(&c.e) {
        return Err(Error::InvalidInput(format!(
            "astronomical elements need a > 0 and 0 <= e < 1 (a = {}, e = {})",
            c.a, c.e
        )));
    }
    let u = solve_kepler_default(c.e, c.l)?;
    let (su, cu) = u.sin_cos();
    let beta = ((1.0 - c.e) * (1.0 + c.e)).sqrt();
    let sqrt_a = c.a.sqrt();
    let denom = sqrt_a * (1.0 - c.e * cu);
    let x = rotate(c.g, [c.a * (cu - c.e), c.a * beta * su]);
    let y = rotate(c.g, [-su / denom, beta * cu / denom]);
    Ok(CartesianState { x, y })
}

pub fn delaunay_to_astro(d: &DelaunayCoords) -> Result<AstroCoords> {
    if !(d.big_l > 0.0) || !(d.big_g > 0.0) || d.big_g > d.big_l {
        return Err(Error::InvalidInput(format!(
            "Delaunay actions need 0 < G <= L (L = {}, G = {})",
            d.big_l, d.big_g
        )));
    }
    let e = ((d.big_l - d.big_g) * (d.big_l + d.big_g)).sqrt() / d.big_l;
    Ok(AstroCoords {
        a: d.big_l * d.big_l,
        e,
        l: d.l,
        g: d.g,
    })
}

pub fn astro_to_delaunay(c: &AstroCoords) -> DelaunayCoords {
    let big_l = c.a.sqrt();
    DelaunayCoords {
        l: c.l,
        big_l,
        g: c.g,
        big_g: big_l * ((1.0 - c.e) * (1.0 + c.e)).sqrt(),
    }
}

/// Off the circular locus only: there `g` and `l` are undefined separately.
pub fn poincare_to_delaunay(p: &PoincareState) -> Result<DelaunayCoords> {
    let rho2 = p.rho2();
    if rho2.sqrt() < TOL_CIRC {
        return Err(Error::CircularLocus);
    }
    if !p.in_domain() {
        return Err(Error::OutOfDomain(format!("{p:?}")));
    }
    let h = p.eta.atan2(p.xi);
    let g = angle::wrap(-h);
    Ok(DelaunayCoords {
        l: angle::wrap(p.lambda - g),
        big_l: p.big_lambda,
        g,
        big_g: p.big_lambda - 0.5 * rho2,
    })
}

pub fn delaunay_to_poincare(d: &DelaunayCoords) -> PoincareState {
    let big_h = d.big_l - d.big_g;
    let k = (2.0 * big_h).max(0.0).sqrt();
    let h = -d.g;
    PoincareState {
        lambda: angle::wrap(d.l + d.g),
        big_lambda: d.big_l,
        eta: k * h.sin(),
        xi: k * h.cos(),
    }
}

/// Circular orbit of radius `Λ²` at mean longitude `λ`.
pub fn circular_state(lambda: f64, big_lambda: f64) -> CartesianState {
    let (s, c) = lambda.sin_cos();
    let a = big_lambda * big_lambda;
    let v = 1.0 / big_lambda;
    CartesianState {
        x: [a * c, a * s],
        y: [-v * s, v * c],
    }
}

/// The Poincaré chart map onto the positively oriented elliptic region.
pub fn poincare_to_cartesian(p: &PoincareState) -> Result<CartesianState> {
    if !p.in_domain() {
        return Err(Error::OutOfDomain(format!(
            "need Λ > 0 and η² + ξ² < 2Λ, got {p:?}"
        )));
    }
    let rho2 = p.rho2();
    if rho2.sqrt() < TOL_CIRC {
        return Ok(circular_state(p.lambda, p.big_lambda));
    }
    let g = -p.eta.atan2(p.xi);
    astro_to_cartesian(&AstroCoords {
        a: p.big_lambda * p.big_lambda,
        e: p.eccentricity(),
        l: p.lambda - g,
        g,
    })
}

/// Inverse of [`poincare_to_cartesian`].
///
/// Built from the energy, the angular momentum and the eccentricity vector so
/// that no angle is extracted from a vanishing vector near `e = 0`.
pub fn cartesian_to_poincare(s: &CartesianState) -> Result<PoincareState> {
    let energy = s.energy();
    let momentum = s.angular_momentum();
    if !(energy < 0.0) || !(momentum > 0.0) {
        return Err(Error::NotElliptic { energy, momentum });
    }
    let a = -0.5 / energy;
    let big_l = a.sqrt();
    let beta = (momentum / big_l).min(1.0);
    let z = s.position();
    let v = s.velocity();
    let r = z.norm();
    let v2 = v.norm_sqr();
    let rv = s.x[0] * s.y[0] + s.x[1] * s.y[1];
    // eccentricity vector e·e^{ig}, pointing at the pericenter
    let ecc = z * (v2 - 1.0 / r) - v * rv;
    let e_sin_u = rv / big_l;
    let w = z / a + ecc + Complex64::i() * ecc * (e_sin_u / (1.0 + beta));
    let lambda = angle::wrap(w.arg() - e_sin_u);
    let k = (2.0 * big_l / (1.0 + beta)).sqrt();
    Ok(PoincareState {
        lambda,
        big_lambda: big_l,
        eta: -k * ecc.im,
        xi: k * ecc.re,
    })
}

pub fn cartesian_to_astro(s: &CartesianState) -> Result<AstroCoords> {
    let p = cartesian_to_poincare(s)?;
    let e = p.eccentricity();
    let (l, g) = if p.rho2().sqrt() < TOL_CIRC {
        (p.lambda, 0.0)
    } else {
        let d = poincare_to_delaunay(&p)?;
        (d.l, d.g)
    };
    Ok(AstroCoords {
        a: p.big_lambda * p.big_lambda,
        e,
        l,
        g,
    })
}

/// Jacobian of [`poincare_to_cartesian`] with respect to `(λ, η, Λ, ξ)`,
/// by central differences with step `h`.
pub fn poincare_to_cartesian_jacobian(p: &PoincareState, h: f64) -> Result<Matrix4<f64>> {
    let base = p.to_symplectic();
    let mut jac = Matrix4::zeros();
    for k in 0..4 {
        let mut plus = base;
        let mut minus = base;
        plus[k] += h;
        minus[k] -= h;
        let fp = poincare_to_cartesian(&PoincareState::from_symplectic(plus))?.to_array();
        let fm = poincare_to_cartesian(&PoincareState::from_symplectic(minus))?.to_array();
        for i in 0..4 {
            jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Jacobian of [`cartesian_to_poincare`] (rows ordered `(λ, η, Λ, ξ)`), by
/// central differences with step `h`, wrap-aware in `λ`.
pub fn cartesian_to_poincare_jacobian(s: &CartesianState, h: f64) -> Result<Matrix4<f64>> {
    let base = s.to_array();
    let mut jac = Matrix4::zeros();
    for k in 0..4 {
        let mut plus = base;
        let mut minus = base;
        plus[k] += h;
        minus[k] -= h;
        let fp = cartesian_to_poincare(&CartesianState::from_array(plus))?.to_symplectic();
        let fm = cartesian_to_poincare(&CartesianState::from_array(minus))?.to_symplectic();
        jac[(0, k)] = angle::diff(fp[0], fm[0]) / (2.0 * h);
        for i in 1..4 {
            jac[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Number of turns of a closed path around the origin.
pub fn winding_number(path: &[CartesianState], tol: f64) -> Result<i64> {
    if path.len() < 3 {
        return Err(Error::InvalidInput(
            "winding number needs at least 3 samples".into(),
        ));
    }
    let min_r = path
        .iter()
        .map(CartesianState::radius)
        .fold(f64::INFINITY, f64::min);
    if min_r < tol {
        return Err(Error::PathThroughOrigin(min_r));
    }
    let (first, last) = (path[0].x, path[path.len() - 1].x);
    let gap = (first[0] - last[0]).hypot(first[1] - last[1]);
    if gap > tol.max(1e-6 * path[0].radius()) {
        return Err(Error::NotClosed(gap));
    }
    let total: f64 = path
        .windows(2)
        .map(|w| angle::diff(w[1].position().arg(), w[0].position().arg()))
        .sum();
    let turns = total / TAU;
    let n = turns.round();
    if (turns - n).abs() >= 0.1 {
        return Err(Error::InvalidInput(format!(
            "path too coarsely sampled for a winding number ({turns:.3} turns)"
        )));
    }
    Ok(n as i64)
}

/// A state tagged with its chart, serialized as
/// `{"chart": "...", "values": [...]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "TaggedValues", try_from = "TaggedValues")]
pub enum ChartState {
    Cartesian(CartesianState),
    Poincare(PoincareState),
    Delaunay(DelaunayCoords),
    Astro(AstroCoords),
}

#[derive(Serialize, Deserialize)]
struct TaggedValues {
    chart: String,
    values: Vec<f64>,
}

impl From<ChartState> for TaggedValues {
    fn from(s: ChartState) -> Self {
        let (chart, values) = match s {
            ChartState::Cartesian(c) => ("cartesian", c.to_array().to_vec()),
            ChartState::Poincare(p) => ("poincare", vec![p.lambda, p.big_lambda, p.eta, p.xi]),
            ChartState::Delaunay(d) => ("delaunay", vec![d.l, d.big_l, d.g, d.big_g]),
            ChartState::Astro(a) => ("astro", vec![a.a, a.e, a.l, a.g]),
        };
        TaggedValues {
            chart: chart.to_string(),
            values,
        }
    }
}

impl TryFrom<TaggedValues> for ChartState {
    type Error = String;

    fn try_from(t: TaggedValues) -> std::result::Result<Self, String> {
        let v: [f64; 4] = t
            .values
            .try_into()
            .map_err(|v: Vec<f64>| format!("expected 4 values, got {}", v.len()))?;
        Ok(match t.chart.as_str() {
            "cartesian" => ChartState::Cartesian(CartesianState::from_array(v)),
            "poincare" => ChartState::Poincare(PoincareState::new(v[0], v[1], v[2], v[3])),
            "delaunay" => ChartState::Delaunay(DelaunayCoords {
                l: v[0],
                big_l: v[1],
                g: v[2],
                big_g: v[3],
            }),
            "astro" => ChartState::Astro(AstroCoords {
                a: v[0],
                e: v[1],
                l: v[2],
                g: v[3],
            }),
            other => return Err(format!("unknown chart {other:?}")),
        })
    }
}

impl ChartState {
    pub fn to_cartesian(&self) -> Result<CartesianState> {
        match self {
            ChartState::Cartesian(c) => Ok(*c),
            ChartState::Poincare(p) => poincare_to_cartesian(p),
            ChartState::Delaunay(d) => astro_to_cartesian(&delaunay_to_astro(d)?),
            ChartState::Astro(a) => astro_to_cartesian(a),
        }
    }
}
