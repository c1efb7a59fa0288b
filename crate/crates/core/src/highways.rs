//! Highways: the level sets `𝓛* = A00 + A01` of the Maximum-crest reduced
//! Poincaré function, which are near-vertical channels in `(I, θ)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::crests::{crest_slope, critical_actions, tangency_points, xi_principal, CrestType};
use crate::model::{coeffs, ModelParams};
use crate::num::roots::bisect;
use crate::num::angle_diff;
use crate::scattering::{dtheta_dpsi, reduced_poincare_psi};
use crate::{Error, Result};

/// Proximity to a tangency point (in ψ) at which a highway counts as broken.
pub const BREAKAGE_PROXIMITY: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// `θ ∈ (0, π)`.
    Left,
    /// `θ ∈ (π, 2π)`.
    Right,
}

impl Side {
    fn bracket(self) -> (f64, f64) {
        match self {
            Side::Left => (0.0, PI),
            Side::Right => (PI, TAU),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighwaySample {
    #[serde(rename = "I")]
    pub i: f64,
    pub theta: f64,
    pub psi: f64,
    pub side: Side,
    /// `|𝔏*(I, ψ) − (A00 + A01)|`.
    pub residual: f64,
}

/// Closed or open interval of actions; infinite ends are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighwayDomain {
    /// The guaranteed set `B` built from `I_+` and `I_++`.
    pub intervals: Vec<Interval>,
    /// Actions where the numeric breakage detector found an intact highway.
    pub effective: Vec<Interval>,
}

impl HighwayDomain {
    pub fn contains(&self, i: f64) -> bool {
        self.intervals.iter().any(|r| r.contains(i))
    }

    pub fn effective_contains(&self, i: f64) -> bool {
        self.effective.iter().any(|r| r.contains(i) || r.lo == i || r.hi == i)
    }
}

/// Level value of the highways.
pub fn highway_level(params: &ModelParams) -> f64 {
    let c = coeffs(params, 0.0);
    c.c00 + c.c01
}

fn level_gap(params: &ModelParams, i: f64, psi: f64) -> f64 {
    let c = coeffs(params, i);
    let xi = xi_principal(params, CrestType::Maximum, i, psi).unwrap_or(f64::NAN);
    c.c10 * psi.cos() + c.c01 * (xi.cos() - 1.0)
}

fn solve_psi(params: &ModelParams, i: f64, side: Side, seed: Option<f64>) -> Result<f64> {
    params.require_scattering()?;
    if crest_slope(params, i).abs() > 1.0 || coeffs(params, i).c10 == 0.0 {
        return Err(Error::NotInDomain(i));
    }
    let (lo, hi) = side.bracket();
    let f = |psi: f64| level_gap(params, i, psi);
    if let Some(s) = seed {
        let (a, b) = ((s - 0.1).max(lo), (s + 0.1).min(hi));
        if let Some(r) = bisect(f, a, b, 1e-14) {
            return Ok(r);
        }
    }
    bisect(f, lo, hi, 1e-14).ok_or(Error::NotInDomain(i))
}

/// `ψ_h(I)`: the unique root of `A10 cos ψ + A01 (cos ξ_M − 1)` on the side's
/// half-circle. Needs a horizontal crest at `I`.
pub fn highway_psi(params: &ModelParams, i: f64, side: Side) -> Result<f64> {
    solve_psi(params, i, side, None)
}

/// Whether the highway point at `I` is clear of the tangency locus: it must
/// sit on an increasing piece of `θ(ψ)` and more than [`BREAKAGE_PROXIMITY`]
/// away from both tangency angles.
pub fn is_intact(params: &ModelParams, i: f64, psi: f64) -> bool {
    match dtheta_dpsi(params, i, psi, CrestType::Maximum) {
        Ok(d) if d > 0.0 => {}
        _ => return false,
    }
    match tangency_points(params, i) {
        None => true,
        Some(t) => angle_diff(psi, t.psi1).abs() > BREAKAGE_PROXIMITY && angle_diff(psi, t.psi2).abs() > BREAKAGE_PROXIMITY,
    }
}

fn sample(params: &ModelParams, i: f64, side: Side, seed: Option<f64>) -> Result<HighwaySample> {
    let psi = solve_psi(params, i, side, seed)?;
    if !is_intact(params, i, psi) {
        return Err(Error::NotInDomain(i));
    }
    let xi = xi_principal(params, CrestType::Maximum, i, psi)?;
    let level = reduced_poincare_psi(params, i, psi, CrestType::Maximum)?;
    Ok(HighwaySample {
        i,
        theta: psi - i * xi,
        psi,
        side,
        residual: (level - highway_level(params)).abs(),
    })
}

/// Highway point at one action, checked against breakage.
pub fn highway_point(params: &ModelParams, i: f64, side: Side) -> Result<HighwaySample> {
    sample(params, i, side, None)
}

/// `θ_h(I)` on the given side.
pub fn highway_theta(params: &ModelParams, i: f64, side: Side) -> Result<f64> {
    highway_point(params, i, side).map(|s| s.theta)
}

/// Samples of a traced highway, plus the error that stopped it early if any.
#[derive(Debug, Clone, PartialEq)]
pub struct HighwayTrace {
    pub samples: Vec<HighwaySample>,
    pub error: Option<Error>,
}

/// Traces a highway from `i_from` to `i_to` with the given step, seeding each
/// root solve with the previous `ψ`.
pub fn trace_highway(params: &ModelParams, side: Side, i_from: f64, i_to: f64, step: f64) -> HighwayTrace {
    let mut out = HighwayTrace { samples: Vec::new(), error: None };
    if !(step > 0.0) {
        out.error = Some(Error::InvalidParams("trace step must be positive".into()));
        return out;
    }
    let n = ((i_to - i_from).abs() / step).ceil().max(1.0) as usize;
    let mut seed = None;
    for k in 0..=n {
        let i = if k == n { i_to } else { i_from + (i_to - i_from) * k as f64 / n as f64 };
        match sample(params, i, side, seed) {
            Ok(s) => {
                seed = Some(s.psi);
                out.samples.push(s);
            }
            Err(e) => {
                out.error = Some(e);
                break;
            }
        }
    }
    out
}

/// Upper end of the breakage scan; beyond it `α` is tiny and the crest
/// cannot reach the tangency condition again.
const DETECTOR_RANGE: f64 = 12.0;
const DETECTOR_STEP: f64 = 1e-2;

/// Guaranteed set `B` and the numerically detected effective domain.
pub fn highway_domain(params: &ModelParams) -> HighwayDomain {
    let inf = f64::INFINITY;
    let intervals = match critical_actions(params) {
        (Some(ip), Some(ipp)) => vec![
            Interval { lo: -inf, hi: -ipp },
            Interval { lo: -ip, hi: ip },
            Interval { lo: ipp, hi: inf },
        ],
        _ => vec![Interval { lo: -inf, hi: inf }],
    };
    // scan I ≥ 0 on the right side; both sides and both signs of I agree by symmetry
    let n = (DETECTOR_RANGE / DETECTOR_STEP).round() as usize;
    let ok: Vec<bool> = (0..=n).map(|k| highway_point(params, k as f64 * DETECTOR_STEP, Side::Right).is_ok()).collect();
    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut start: Option<usize> = None;
    for k in 0..=n {
        match (ok[k], start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                runs.push((s as f64 * DETECTOR_STEP, (k - 1) as f64 * DETECTOR_STEP));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s as f64 * DETECTOR_STEP, inf));
    }
    let mut effective = Vec::new();
    for &(lo, hi) in runs.iter().rev() {
        if lo > 0.0 {
            effective.push(Interval { lo: -hi, hi: -lo });
        }
    }
    for &(lo, hi) in &runs {
        if lo == 0.0 {
            // the run through the origin is symmetric
            effective.push(Interval { lo: -hi, hi });
        } else {
            effective.push(Interval { lo, hi });
        }
    }
    HighwayDomain { intervals, effective }
}
