//! Small numeric kernels: angle reduction, bracketing root finders,
//! adaptive quadrature and an embedded Runge-Kutta integrator.

pub mod ode;
pub mod quad;
pub mod roots;

use std::f64::consts::{PI, TAU};

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_2pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces an angle to `[-π, π)`.
pub fn wrap_pi(x: f64) -> f64 {
    wrap_2pi(x + PI) - PI
}

/// Shortest signed angular distance from `b` to `a`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_pi(a - b)
}
