use std::f64::consts::TAU;

use crate::angle;
use crate::error::{Error, Result};

const MAX_ITER: usize = 50;

/// Eccentric anomaly `u ∈ [0, 2π)` solving `u − e sin u = l`.
///
/// Newton from `u₀ = l + e sin l`; falls back to bisection on `[0, 2π]` if the
/// residual ever grows.
pub fn solve_kepler(e: f64, l: f64, tol: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::InvalidInput(format!(
            "eccentricity {e} outside [0, 1)"
        )));
    }
    let l = angle::wrap(l);
    if e == 0.0 {
        return Ok(l);
    }
    let f = |u: f64| u - e * u.sin() - l;

    let mut u = l + e * l.sin();
    let mut res = f(u);
    for _ in 0..MAX_ITER {
        if res.abs() <= tol {
            return Ok(angle::wrap(u));
        }
        let step = res / (1.0 - e * u.cos());
        let next = u - step;
        let next_res = f(next);
        if next_res.abs() >= res.abs() {
            // stalled at rounding level or diverging
            if res.abs() <= 8.0 * f64::EPSILON * (1.0 + l) {
                return Ok(angle::wrap(u));
            }
            return bisect(f, tol);
        }
        u = next;
        res = next_res;
    }
    if res.abs() <= tol {
        Ok(angle::wrap(u))
    } else {
        Err(Error::NoConvergence {
            what: "Kepler equation",
            iterations: MAX_ITER,
        })
    }
}

/// [`solve_kepler`] at rounding-level tolerance.
pub fn solve_kepler_default(e: f64, l: f64) -> Result<f64> {
    solve_kepler(e, l, 4.0 * f64::EPSILON * (1.0 + TAU))
}

fn bisect(f: impl Fn(f64) -> f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, TAU);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm.abs() <= tol || hi - lo < 4.0 * f64::EPSILON {
            return Ok(angle::wrap(mid));
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        what: "Kepler bisection",
        iterations: 200,
    })
}
