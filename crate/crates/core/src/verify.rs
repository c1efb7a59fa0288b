//! Independent checks: direct quadrature of the Melnikov integral, full-flow
//! integration, measured homoclinic jumps, and perturbation thresholds.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::crests::{xi_principal, CrestType};
use crate::highways::{highway_point, Side};
use crate::model::{a10_coeff, a10_coeff_prime, full_vector_field, separatrix, FullState, ModelParams};
use crate::num::ode::{integrate, OdeOptions};
use crate::num::quad;
use crate::num::roots::golden_max;
use crate::scattering::{grad_at, tau_star_at, Branch};
use crate::{Error, Result};

/// Sampled full-system trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FullState>,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Trajectory {
    pub fn last(&self) -> FullState {
        *self.states.last().expect("a trajectory holds its initial point")
    }
}

/// Integrates the full Hamiltonian system between two times.
pub fn integrate_full_between(params: &ModelParams, start: [f64; 5], t0: f64, t1: f64, opts: &OdeOptions) -> Result<Trajectory> {
    params.validate()?;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::InvalidParams("integration times must be finite".into()));
    }
    let sol = integrate(
        |_, y: &[f64; 5]| {
            let f = full_vector_field(params, y);
            if f.iter().all(|v| v.is_finite()) {
                Ok(f)
            } else {
                Err(Error::DomainExit { t: 0.0, reason: "non-finite vector field".into() })
            }
        },
        t0,
        start,
        t1,
        opts,
    )?;
    Ok(Trajectory {
        times: sol.times,
        states: sol.states.into_iter().map(|y| FullState { p: y[0], q: y[1], i: y[2], phi: y[3], s: y[4] }).collect(),
        abs_tol: opts.atol,
        rel_tol: opts.rtol,
    })
}

/// Integrates the full system from `s0` over `[0, t]` with relative
/// tolerance `tol`. States are stored unreduced, so angles keep winding.
pub fn integrate_full(params: &ModelParams, s0: FullState, t: f64, tol: f64) -> Result<Trajectory> {
    integrate_full_between(params, s0.to_array(), 0.0, t, &OdeOptions::with_tol(tol))
}

/// Direct quadrature of `∫ (1 − cos q0(σ)) g(φ + Iσ, s + σ) dσ`.
///
/// The integrand decays like `8 e^{−2|σ|}` times the perturbation amplitude,
/// so the real line is cut at `T = ½ ln(8·amp/tol) + 1`.
pub fn melnikov_quadrature_oracle(params: &ModelParams, i: f64, phi: f64, s: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    let amp = params.a00.abs() + params.a10.abs() + params.a01.abs();
    if amp == 0.0 {
        return Ok(0.0);
    }
    let cut = 0.5 * (8.0 * amp / tol).ln().max(0.0) + 1.0;
    let integrand = |sig: f64| {
        let q0 = separatrix(sig).1;
        let g = params.a00 + params.a10 * (phi + i * sig).cos() + params.a01 * (s + sig).cos();
        (1.0 - q0.cos()) * g
    };
    // split into unit pieces so oscillations at large |I| stay resolved
    let pieces = (2.0 * cut).ceil() as usize;
    let h = 2.0 * cut / pieces as f64;
    let mut total = 0.0;
    for j in 0..pieces {
        let a = -cut + j as f64 * h;
        total += quad::integrate(integrand, a, a + h, 0.1 * tol / pieces as f64, 1e-14).value;
    }
    Ok(total)
}

/// One measured homoclinic excursion against the first-order prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpMeasurement {
    /// Change of `I` along the excursion minus that of the inner companion.
    pub measured: f64,
    /// `ε ∂φ𝓛* = −ε A10 sin ψ`.
    pub predicted: f64,
    pub error: f64,
    pub half_time: f64,
    pub psi: f64,
}

/// Half-length `log(1/ε) + 5` of the integrated excursion.
pub fn default_jump_half_time(eps: f64) -> f64 {
    (1.0 / eps.abs()).ln() + 5.0
}

/// Launches the full system on the unperturbed separatrix `T0` before the
/// homoclinic point selected by `τ*` at `(I, φ, s)`, integrates for `2T0`
/// and compares the action jump with `ε ∂φ𝓛*`.
///
/// The inner dynamics moves `I` too, so the same integration started on the
/// saddle `p = q = 0` with identical angles is subtracted.
pub fn measure_homoclinic_jump(params: &ModelParams, i: f64, phi: f64, s: f64, t0: f64) -> Result<JumpMeasurement> {
    params.require_scattering()?;
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::InvalidParams(format!("T0 must be positive, got {t0}")));
    }
    let t = tau_star_at(params, i, phi, s, CrestType::Maximum, Branch::Single)?;
    let (p0, q0) = separatrix(-t0);
    let angles = (t.psi - i * t0, t.s_crest - t0);
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15, h_max: 0.05, ..OdeOptions::default() };
    let outer = integrate_full_between(params, [p0, q0, i, angles.0, angles.1], -t0, t0, &opts)?.last();
    let inner = integrate_full_between(params, [0.0, 0.0, i, angles.0, angles.1], -t0, t0, &opts)?.last();
    let measured = outer.i - inner.i;
    let predicted = params.eps * grad_at(params, i, phi, s, CrestType::Maximum, Branch::Single)?.d_theta;
    Ok(JumpMeasurement { measured, predicted, error: (measured - predicted).abs(), half_time: t0, psi: t.psi })
}

/// Perturbation thresholds at `|I| = I*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonStar {
    pub i_star: f64,
    /// `min_ψ ‖∇𝓛*‖` over the section `|I| = I*`, with `τ = −ξ_M(ψ)`.
    pub eps_star: f64,
    pub psi_at_min: f64,
    /// Minimum of `‖∇𝓛*‖` along the rising highway over `[−I*, I*]`.
    pub highway_min: Option<f64>,
    /// `4π |a10| I* e^{−πI*/2}`.
    pub envelope: f64,
}

fn grad_norm_psi(params: &ModelParams, i: f64, psi: f64) -> Result<f64> {
    let tau = -xi_principal(params, CrestType::Maximum, i, psi)?;
    let a10 = a10_coeff(params, i);
    let d_theta = -a10 * psi.sin();
    let d_i = a10_coeff_prime(params, i) * psi.cos() + tau * a10 * psi.sin();
    Ok(d_i.hypot(d_theta))
}

/// `ε*(I*)`: the smallest gradient of the reduced potential over the action
/// section `|I| = I*`. Needs a horizontal crest there.
pub fn epsilon_star(params: &ModelParams, i_star: f64) -> Result<EpsilonStar> {
    params.require_scattering()?;
    let x = i_star.abs();
    let n = 2000;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &i in &[x, -x] {
        for j in 0..n {
            let psi = TAU * j as f64 / n as f64;
            let v = grad_norm_psi(params, i, psi)?;
            if v < best.0 {
                best = (v, psi, i);
            }
        }
    }
    let (_, p0, i0) = best;
    let h = TAU / n as f64;
    let (psi, neg) = golden_max(|p| -grad_norm_psi(params, i0, p).unwrap_or(f64::INFINITY), p0 - h, p0 + h, 1e-12);
    let (eps_star, psi_at_min) = if -neg < best.0 { (-neg, crate::num::wrap_2pi(psi)) } else { (best.0, best.1) };

    let side = if params.a10 >= 0.0 { Side::Right } else { Side::Left };
    let m = 800;
    let mut hw = f64::INFINITY;
    for j in 0..=m {
        let i = -x + 2.0 * x * j as f64 / m as f64;
        match highway_point(params, i, side) {
            Ok(h) => hw = hw.min(grad_norm_psi(params, i, h.psi)?),
            Err(_) => {
                hw = f64::NAN;
                break;
            }
        }
    }
    Ok(EpsilonStar {
        i_star: x,
        eps_star,
        psi_at_min,
        highway_min: hw.is_finite().then_some(hw),
        envelope: 4.0 * PI * params.a10.abs() * x * (-PI * x / 2.0).exp(),
    })
}
