//! The perturbed pendulum-rotor Hamiltonian and its first-order Melnikov data.
//!
//! `H = p²/2 + cos q − 1 + I²/2 + ε cos q · g(φ, s)` with
//! `g = a00 + a10 cos φ + a01 cos s`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::num::wrap_2pi;
use crate::{Error, Result};

/// `sinh(π/2)`, the normalising constant that appears in `α`, `β` and `A01`.
pub const SINH_HALF_PI: f64 = 2.301_298_902_307_294_7;

/// Coupling amplitudes and perturbation size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a00: f64,
    pub a10: f64,
    pub a01: f64,
    pub eps: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self { a00: 0.0, a10: 0.6, a01: 1.0, eps: 0.01 }
    }
}

impl ModelParams {
    pub fn new(a00: f64, a10: f64, a01: f64, eps: f64) -> Result<Self> {
        let p = Self { a00, a10, a01, eps };
        p.validate()?;
        Ok(p)
    }

    /// Parameters with `a10 = mu · a01`.
    pub fn with_mu(mu: f64, a01: f64, eps: f64) -> Result<Self> {
        Self::new(0.0, mu * a01, a01, eps)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.a00, self.a10, self.a01, self.eps].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParams("all amplitudes and eps must be finite".into()));
        }
        if self.eps < 0.0 {
            return Err(Error::InvalidParams(format!("eps must be >= 0, got {}", self.eps)));
        }
        Ok(())
    }

    /// Scattering constructions need both `a10` and `a01` nonzero.
    pub fn require_scattering(&self) -> Result<()> {
        self.validate()?;
        if self.a10 * self.a01 == 0.0 {
            return Err(Error::InvalidParams("scattering needs a10 * a01 != 0".into()));
        }
        Ok(())
    }

    /// `μ = a10 / a01`.
    pub fn mu(&self) -> f64 {
        self.a10 / self.a01
    }

    pub fn with_eps(self, eps: f64) -> Self {
        Self { eps, ..self }
    }

    /// Flips the sign of `a01`, which flips `μ` and leaves `A10` unchanged.
    pub fn mirrored_mu(self) -> Self {
        Self { a01: -self.a01, ..self }
    }
}

/// State of the full system. `q` and `phi` are kept in `[0, 2π)`; `s` is the
/// unreduced time-angle so trajectories stay continuous in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullState {
    pub p: f64,
    pub q: f64,
    #[serde(rename = "I")]
    pub i: f64,
    pub phi: f64,
    pub s: f64,
}

impl FullState {
    pub fn new(p: f64, q: f64, i: f64, phi: f64, s: f64) -> Self {
        Self { p, q: wrap_2pi(q), i, phi: wrap_2pi(phi), s }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.p, self.q, self.i, self.phi, self.s]
    }

    /// Rebuilds a state from integrator coordinates, reducing the angles.
    pub fn from_array(y: [f64; 5]) -> Self {
        Self::new(y[0], y[1], y[2], y[3], y[4])
    }

    /// Pendulum energy `p²/2 + cos q − 1`; zero on the separatrix.
    pub fn pendulum_energy(&self) -> f64 {
        pendulum_energy(self.p, self.q)
    }
}

pub fn pendulum_energy(p: f64, q: f64) -> f64 {
    0.5 * p * p + q.cos() - 1.0
}

/// Melnikov coefficients at one action value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelnikovCoeffs {
    /// Constant term `A00 = 4 a00`.
    #[serde(rename = "A00")]
    pub c00: f64,
    /// `A10(I) = 2π I a10 / sinh(πI/2)`.
    #[serde(rename = "A10")]
    pub c10: f64,
    /// `A01 = 2π a01 / sinh(π/2)`.
    #[serde(rename = "A01")]
    pub c01: f64,
}

/// `x / sinh x` with its removable singularity and overflow tail handled.
pub fn x_over_sinh(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.05 {
        let x2 = x * x;
        1.0 + x2 * (-1.0 / 6.0 + x2 * (7.0 / 360.0 + x2 * (-31.0 / 15120.0 + x2 * 127.0 / 604800.0)))
    } else if ax > 700.0 {
        0.0
    } else {
        x / x.sinh()
    }
}

/// Derivative of [`x_over_sinh`].
pub fn d_x_over_sinh(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 0.05 {
        let x2 = x * x;
        x * (-1.0 / 3.0 + x2 * (7.0 / 90.0 + x2 * (-31.0 / 2520.0 + x2 * 127.0 / 75600.0)))
    } else if ax > 350.0 {
        0.0
    } else {
        let sh = x.sinh();
        (sh - x * x.cosh()) / (sh * sh)
    }
}

/// Unperturbed separatrix `(2/cosh t, 4 arctan eᵗ)`; `q0` lies in `(0, 2π)`.
pub fn separatrix(t: f64) -> (f64, f64) {
    (2.0 / t.cosh(), 4.0 * t.exp().atan())
}

pub fn coeffs(params: &ModelParams, i: f64) -> MelnikovCoeffs {
    MelnikovCoeffs {
        c00: 4.0 * params.a00,
        c10: a10_coeff(params, i),
        c01: TAU * params.a01 / SINH_HALF_PI,
    }
}

/// `A10(I)`, even in `I`, with `A10(0) = 4 a10`.
pub fn a10_coeff(params: &ModelParams, i: f64) -> f64 {
    4.0 * params.a10 * x_over_sinh(FRAC_PI_2 * i)
}

/// `dA10/dI`, odd in `I`.
pub fn a10_coeff_prime(params: &ModelParams, i: f64) -> f64 {
    TAU * params.a10 * d_x_over_sinh(FRAC_PI_2 * i)
}

/// Melnikov potential `A00 + A10(I) cos φ + A01 cos s`.
pub fn melnikov_potential(params: &ModelParams, i: f64, phi: f64, s: f64) -> f64 {
    let c = coeffs(params, i);
    c.c00 + c.c10 * phi.cos() + c.c01 * s.cos()
}

/// `α(I) = sinh(π/2) I² / sinh(πI/2)`.
///
/// Written as `sinh(π/2)·I·(2/π)·x/sinh x` with `x = πI/2`, so the sign of
/// `I` is carried through: `α(−I) = −α(I)`, which is what the crest
/// equation `μα(I) sin φ + sin s = 0` needs for `I < 0`.
pub fn alpha(i: f64) -> f64 {
    SINH_HALF_PI * i * (2.0 / PI) * x_over_sinh(FRAC_PI_2 * i)
}

/// `β(I) = I α(I)`, even.
pub fn beta(i: f64) -> f64 {
    i * alpha(i)
}

/// Hamilton's equations; returns `(ṗ, q̇, İ, φ̇, ṡ)`.
pub fn full_vector_field(params: &ModelParams, y: &[f64; 5]) -> [f64; 5] {
    let [p, q, i, phi, s] = *y;
    let g = params.a00 + params.a10 * phi.cos() + params.a01 * s.cos();
    [
        q.sin() * (1.0 + params.eps * g),
        p,
        params.eps * params.a10 * q.cos() * phi.sin(),
        i,
        1.0,
    ]
}

/// First integral of the inner dynamics on `p = q = 0`.
pub fn inner_first_integral(params: &ModelParams, i: f64, phi: f64) -> f64 {
    0.5 * i * i + params.eps * params.a10 * (phi.cos() - 1.0)
}
