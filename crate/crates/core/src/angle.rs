//! Angle helpers. Angles are stored in `[0, 2π)` and compared modulo `2π`.

use std::f64::consts::{PI, TAU};

/// Reduce an angle to `[0, 2π)`.
pub fn wrap(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed difference `a - b` reduced to `(-π, π]`.
pub fn diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Wrap-aware distance on the circle.
pub fn dist(a: f64, b: f64) -> f64 {
    diff(a, b).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_and_distance() {
        assert_eq!(wrap(-1e-300), 0.0);
        assert!((wrap(-PI / 2.0) - 1.5 * PI).abs() < 1e-15);
        assert!((dist(0.1, TAU - 0.1) - 0.2).abs() < 1e-15);
        assert!((diff(0.1, TAU - 0.1) - 0.2).abs() < 1e-15);
        assert!((dist(PI, -PI)).abs() < 1e-15);
    }
}
