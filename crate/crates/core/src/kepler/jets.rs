//! Derivatives of the Poincaré chart at the circular locus `η = ξ = 0`.
//!
//! Positions are identified with complex numbers `x = x₁ + i x₂`. The `η` and
//! `ξ` derivatives come from the radial chart `η = r sin h`, `ξ = r cos h`:
//! `∂ₓ/∂η` and `∂²x/∂η²` are the `r`-derivatives at `h = π/2`, the `ξ`
//! derivatives those at `h = 0`, and the mixed one is recovered at `h = π/4`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use super::{circular_state, CartesianState};

/// `r`-derivatives at `r = 0` of the position in the radial chart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialJet {
    pub dr: Complex64,
    pub drr: Complex64,
    /// `∂²x̃/∂λ∂r`.
    pub dr_dlambda: Complex64,
}

fn rotate_back(h: f64, v: Complex64) -> Complex64 {
    Complex64::from_polar(1.0, -h) * v
}

pub fn radial_chart_jet(lambda: f64, big_lambda: f64, h: f64) -> RadialJet {
    let phi = lambda + h;
    let (s2, c2) = (2.0 * phi).sin_cos();
    let l32 = big_lambda.powf(1.5);
    let dr = rotate_back(h, Complex64::new(-3.0 + c2, s2) * (0.5 * l32));
    let dr_dlambda = rotate_back(h, Complex64::new(-s2, c2) * l32);
    let e1 = Complex64::from_polar(1.0, phi);
    let drr =
        Complex64::from_polar(big_lambda, -h) * (-e1 + 0.25 * (e1.conj() + 3.0 * e1 * e1 * e1));
    RadialJet {
        dr,
        drr,
        dr_dlambda,
    }
}

/// Position/velocity jet at `(λ, Λ, 0, 0)` with respect to `(λ, η, ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareJet2 {
    pub value: CartesianState,
    /// `[∂x/∂λ, ∂x/∂η, ∂x/∂ξ]`.
    pub dx: [Complex64; 3],
    /// `[∂y/∂λ, ∂y/∂η, ∂y/∂ξ]`, from `y = Λ⁻³ ∂x/∂λ`.
    pub dy: [Complex64; 3],
    /// Symmetric second derivatives of `x` in `(λ, η, ξ)`.
    pub d2x: [[Complex64; 3]; 3],
    pub dx_dbig_lambda: Complex64,
    pub d2x_dbig_lambda2: Complex64,
}

pub fn poincare_jet_circular(lambda: f64, big_lambda: f64) -> PoincareJet2 {
    let at_eta = radial_chart_jet(lambda, big_lambda, FRAC_PI_2);
    let at_xi = radial_chart_jet(lambda, big_lambda, 0.0);
    let at_diag = radial_chart_jet(lambda, big_lambda, FRAC_PI_4);

    let e1 = Complex64::from_polar(1.0, lambda);
    let l2 = big_lambda * big_lambda;
    let dx_l = Complex64::i() * e1 * l2;
    let dx_ll = -e1 * l2;

    let d_ee = at_eta.drr;
    let d_xx = at_xi.drr;
    let d_ex = at_diag.drr - 0.5 * (d_ee + d_xx);

    let dx = [dx_l, at_eta.dr, at_xi.dr];
    let d2x = [
        [dx_ll, at_eta.dr_dlambda, at_xi.dr_dlambda],
        [at_eta.dr_dlambda, d_ee, d_ex],
        [at_xi.dr_dlambda, d_ex, d_xx],
    ];
    let inv_l3 = 1.0 / (l2 * big_lambda);
    let dy = [d2x[0][0] * inv_l3, d2x[0][1] * inv_l3, d2x[0][2] * inv_l3];
    PoincareJet2 {
        value: circular_state(lambda, big_lambda),
        dx,
        dy,
        d2x,
        dx_dbig_lambda: e1 * (2.0 * big_lambda),
        d2x_dbig_lambda2: e1 * 2.0,
    }
}
