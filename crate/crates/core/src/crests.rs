//! Crests: the curves in the `(φ, s)` torus where the Melnikov potential is
//! critical along NHIM lines, `μα(I) sin φ + sin s = 0`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::model::{alpha, beta, ModelParams};
use crate::num::roots::{all_roots, golden_max};
use crate::num::wrap_2pi;
use crate::{Error, Result};

/// Tolerance on `| |μα(I)| − 1 |` below which a crest counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrestType {
    /// Crest through the maximum `(φ, s) = (0, 0)`.
    Maximum,
    /// Crest through the minimum `(φ, s) = (π, π)`.
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// Graph over `φ`: `s = ξ(I, φ)`.
    Horizontal,
    /// Graph over `s`: `φ = η(I, s)`.
    Vertical,
    Singular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrestKind {
    pub branch: CrestType,
    pub orientation: Orientation,
}

/// Points where NHIM lines touch the Maximum crest at a given action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencyInfo {
    #[serde(rename = "I")]
    pub i: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    SingleMap,
    Tangency,
    Holes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub mu: f64,
    /// `(1/max β, 1/max α)`.
    pub thresholds: (f64, f64),
    #[serde(rename = "I_plus")]
    pub i_plus: Option<f64>,
    #[serde(rename = "I_plusplus")]
    pub i_plusplus: Option<f64>,
    /// `|μ|` sits on a threshold (to 1e-9); closed intervals were used.
    pub on_boundary: bool,
}

/// Location and value of the maxima of `α` and `β` on `I > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrema {
    pub i_alpha: f64,
    pub alpha_max: f64,
    pub i_beta: f64,
    pub beta_max: f64,
}

/// Numeric maxima of `α` and `β` (golden section, tol 1e-10).
pub fn extrema() -> Extrema {
    let (i_alpha, alpha_max) = golden_max(alpha, 0.1, 5.0, 1e-10);
    let (i_beta, beta_max) = golden_max(beta, 0.1, 5.0, 1e-10);
    Extrema { i_alpha, alpha_max, i_beta, beta_max }
}

/// `(μ_low, μ_high) = (1/max β, 1/max α)`.
pub fn regime_thresholds() -> (f64, f64) {
    let e = extrema();
    (1.0 / e.beta_max, 1.0 / e.alpha_max)
}

/// Crest slope `k = μ α(I)`; horizontal iff `|k| < 1`.
pub fn crest_slope(params: &ModelParams, i: f64) -> f64 {
    params.mu() * alpha(i)
}

pub fn crest_orientation(params: &ModelParams, i: f64) -> Orientation {
    let k = crest_slope(params, i).abs();
    if (k - 1.0).abs() <= SINGULAR_TOL {
        Orientation::Singular
    } else if k < 1.0 {
        Orientation::Horizontal
    } else {
        Orientation::Vertical
    }
}

pub fn crest_kind(params: &ModelParams, branch: CrestType, i: f64) -> CrestKind {
    CrestKind { branch, orientation: crest_orientation(params, i) }
}

/// Left-hand side of the crest equation.
pub fn crest_residual(params: &ModelParams, i: f64, phi: f64, s: f64) -> f64 {
    crest_slope(params, i) * phi.sin() + s.sin()
}

fn checked_asin(x: f64, what: &'static str) -> Result<f64> {
    // allow for rounding right at the fold
    if x.abs() > 1.0 + 1e-14 {
        return Err(Error::Domain(what));
    }
    Ok(x.clamp(-1.0, 1.0).asin())
}

/// Principal-branch `ξ` in `[−π/2, π/2]` (Maximum) or `[π/2, 3π/2]` (Minimum).
pub fn xi_principal(params: &ModelParams, branch: CrestType, i: f64, phi: f64) -> Result<f64> {
    let u = checked_asin(crest_slope(params, i) * phi.sin(), "xi")?;
    Ok(match branch {
        CrestType::Maximum => -u,
        CrestType::Minimum => u + PI,
    })
}

/// Horizontal parameterization `s = ξ(I, φ)` reduced to `[0, 2π)`.
pub fn xi(params: &ModelParams, branch: CrestType, i: f64, phi: f64) -> Result<f64> {
    xi_principal(params, branch, i, phi).map(wrap_2pi)
}

/// `∂ξ/∂φ` on the given branch.
pub fn xi_slope(params: &ModelParams, branch: CrestType, i: f64, phi: f64) -> Result<f64> {
    let k = crest_slope(params, i);
    let x = k * phi.sin();
    if x.abs() >= 1.0 {
        return Err(Error::Domain("xi_slope"));
    }
    let d = k * phi.cos() / (1.0 - x * x).sqrt();
    Ok(match branch {
        CrestType::Maximum => -d,
        CrestType::Minimum => d,
    })
}

/// Vertical parameterization `φ = η(I, s)` reduced to `[0, 2π)`.
pub fn eta(params: &ModelParams, branch: CrestType, i: f64, s: f64) -> Result<f64> {
    let k = crest_slope(params, i);
    if k == 0.0 {
        return Err(Error::Domain("eta"));
    }
    let u = checked_asin(s.sin() / k, "eta")?;
    Ok(wrap_2pi(match branch {
        CrestType::Maximum => -u,
        CrestType::Minimum => u + PI,
    }))
}

/// Tangency points of NHIM lines with the Maximum crest at action `I`.
///
/// Returns `None` unless the crest is horizontal and `|I μ α(I)| ≥ 1`. For
/// `μ > 0` the angles sit around `π`; for `μ < 0` they sit around `0`
/// (`psi1 ∈ [0, π/2)`), still with `psi2 = 2π − psi1`.
pub fn tangency_points(params: &ModelParams, i: f64) -> Option<TangencyInfo> {
    if crest_orientation(params, i) != Orientation::Horizontal {
        return None;
    }
    let k = crest_slope(params, i);
    let ik = i * k;
    if ik.abs() < 1.0 {
        return None;
    }
    let r = ((ik * ik - 1.0) / (1.0 - k * k)).max(0.0).sqrt();
    let (psi1, psi2) = if ik > 0.0 { (PI - r.atan(), PI + r.atan()) } else { (r.atan(), TAU - r.atan()) };
    let theta = |psi: f64| -> f64 {
        let xi = -(k * psi.sin()).clamp(-1.0, 1.0).asin();
        psi - i * xi
    };
    let (t1, t2) = (theta(psi1), theta(psi2));
    let (theta1, theta2) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
    Some(TangencyInfo { i, psi1, psi2, theta1, theta2 })
}

/// The `(I_+, I_++)` pair bounding the band where the highway may break.
pub fn critical_actions(params: &ModelParams) -> (Option<f64>, Option<f64>) {
    let m = params.mu().abs();
    if !(m.is_finite() && m > 0.0) {
        return (None, None);
    }
    let ex = extrema();
    let target = 1.0 / m;
    if target > ex.beta_max {
        return (None, None);
    }
    const SCAN_END: f64 = 30.0;
    const SCAN_CELLS: usize = 3000;
    let beta_roots = all_roots(|x| beta(x) - target, 0.0, SCAN_END, SCAN_CELLS, 1e-12);
    let beta_roots: Vec<f64> = beta_roots.into_iter().filter(|&r| r > 0.0).collect();
    if beta_roots.is_empty() {
        // touching the maximum: the two roots merge at I_β
        return (Some(ex.i_beta), Some(ex.i_beta));
    }
    let i_pp = *beta_roots.last().unwrap();
    let i_p = if m <= 1.0 {
        beta_roots[0]
    } else {
        let ar = all_roots(|x| alpha(x) - target, 0.0, SCAN_END, SCAN_CELLS, 1e-12);
        ar.into_iter().find(|&r| r > 0.0).unwrap_or(beta_roots[0])
    };
    (Some(i_p), Some(i_pp))
}

pub fn classify_regime(params: &ModelParams) -> RegimeReport {
    let m = params.mu().abs();
    let (lo, hi) = regime_thresholds();
    let regime = if m < lo {
        Regime::SingleMap
    } else if m <= hi {
        Regime::Tangency
    } else {
        Regime::Holes
    };
    let (i_plus, i_plusplus) = critical_actions(params);
    RegimeReport {
        regime,
        mu: params.mu(),
        thresholds: (lo, hi),
        i_plus,
        i_plusplus,
        on_boundary: (m - lo).abs() <= 1e-9 || (m - hi).abs() <= 1e-9,
    }
}
