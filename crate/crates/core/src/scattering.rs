//! NHIM-line/crest crossings, reduced Poincaré functions and the truncated
//! scattering map.
//!
//! Along the NHIM line through `(φ, s)` the Melnikov potential is evaluated at
//! `(φ − Iτ, s − τ)`. A crossing `τ*` is a zero of
//! `G(τ) = μα(I) sin(φ − Iτ) + sin(s − τ)` with `s − τ ∈ (−π/2, 3π/2]`.
//! The reduced variables are `θ = φ − Is` and `ψ = θ − Iτ*` (taking `s = 0`).

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::crests::{crest_orientation, crest_slope, tangency_points, CrestType, Orientation, TangencyInfo};
use crate::model::{a10_coeff, a10_coeff_prime, coeffs, ModelParams};
use crate::num::ode::{integrate, OdeOptions};
use crate::num::roots::{all_roots, bisect};
use crate::num::wrap_2pi;
use crate::{Error, Result};

/// Sampling cells over the `2π`-long τ-window (step `π/200`).
pub const TAU_SCAN_CELLS: usize = 400;
/// Gradients are refused when `|dθ/dψ|` falls below this.
pub const TANGENCY_GUARD: f64 = 1e-6;

/// A point `(I, θ)` of the scattering cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    #[serde(rename = "I")]
    pub i: f64,
    pub theta: f64,
}

impl ReducedPoint {
    pub fn new(i: f64, theta: f64) -> Self {
        Self { i, theta: wrap_2pi(theta) }
    }
}

/// Which crossing of a NHIM line defines the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// Crossing with minimal `|τ|` (ties: smaller `τ`).
    Single,
    /// Increasing piece of `θ(ψ)` with the largest `ψ`.
    A,
    /// Increasing piece of `θ(ψ)` with the smallest `ψ`.
    B,
    /// Decreasing piece of `θ(ψ)` between the tangency points.
    C,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Single => "single",
            Branch::A => "A",
            Branch::B => "B",
            Branch::C => "C",
        }
    }
}

/// A resolved crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauStar {
    pub tau: f64,
    /// `φ − Iτ` reduced to `[0, 2π)`.
    pub psi: f64,
    /// `s − τ`, in `(−π/2, 3π/2]`.
    pub s_crest: f64,
    pub crest: CrestType,
    pub branch: Branch,
    /// `dθ/dψ` along the crest at this crossing.
    pub dtheta_dpsi: f64,
}

/// ψ-domains of the three bijections in the tangency regime (`μ > 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDomains {
    pub tangency: TangencyInfo,
    /// `ψ̃₁ ∈ [ψ₂, 2π]` with `θ(ψ̃₁) = θ₁`.
    pub psi1_tilde: f64,
    /// `ψ̃₂ ∈ [0, ψ₁]` with `θ(ψ̃₂) = θ₂`.
    pub psi2_tilde: f64,
    pub a: Vec<(f64, f64)>,
    pub b: Vec<(f64, f64)>,
    pub c: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSet {
    pub available: Vec<Branch>,
    /// ψ of every crossing found on the requested crest.
    pub crossings: Vec<f64>,
    pub domains: Option<BranchDomains>,
}

/// Every crossing on the requested crest of the NHIM line through `(φ, s)`.
pub fn crossings(params: &ModelParams, i: f64, phi: f64, s: f64, crest: CrestType) -> Result<Vec<TauStar>> {
    params.require_scattering()?;
    let orientation = crest_orientation(params, i);
    if orientation == Orientation::Singular {
        return Err(Error::SingularCrest(i));
    }
    let k = crest_slope(params, i);
    let g = |tau: f64| k * (phi - i * tau).sin() + (s - tau).sin();
    let lo = s - 1.5 * PI;
    let hi = s + FRAC_PI_2;
    let mut out = Vec::new();
    for tau in all_roots(g, lo, hi, TAU_SCAN_CELLS, 0.0) {
        let s_crest = s - tau;
        if s_crest <= -FRAC_PI_2 {
            continue;
        }
        let psi = phi - i * tau;
        let on_max = match orientation {
            Orientation::Horizontal => s_crest.cos() > 0.0,
            _ => psi.cos() > 0.0,
        };
        let kind = if on_max { CrestType::Maximum } else { CrestType::Minimum };
        if kind != crest {
            continue;
        }
        // implicit derivative of the crest: k cos ψ dψ + cos s_c ds_c = 0
        let ds = -k * psi.cos() / s_crest.cos();
        out.push(TauStar {
            tau,
            psi: wrap_2pi(psi),
            s_crest,
            crest,
            branch: Branch::Single,
            dtheta_dpsi: 1.0 - i * ds,
        });
    }
    Ok(out)
}

fn select(list: &[TauStar], branch: Branch) -> Option<TauStar> {
    let by_abs_tau = |a: &&TauStar, b: &&TauStar| a.tau.abs().total_cmp(&b.tau.abs()).then(a.tau.total_cmp(&b.tau));
    let chosen = match branch {
        Branch::Single => list.iter().min_by(by_abs_tau),
        Branch::A => list.iter().filter(|c| c.dtheta_dpsi > 0.0).max_by(|a, b| a.psi.total_cmp(&b.psi)),
        Branch::B => list.iter().filter(|c| c.dtheta_dpsi > 0.0).min_by(|a, b| a.psi.total_cmp(&b.psi)),
        Branch::C => list.iter().filter(|c| c.dtheta_dpsi < 0.0).min_by(by_abs_tau),
    };
    chosen.map(|c| TauStar { branch, ..*c })
}

/// `τ*` on the NHIM line through `(I, φ, s)`.
pub fn tau_star_at(params: &ModelParams, i: f64, phi: f64, s: f64, crest: CrestType, branch: Branch) -> Result<TauStar> {
    let list = crossings(params, i, phi, s, crest)?;
    if list.is_empty() {
        return Err(Error::NoCrossing { i, theta: wrap_2pi(phi - i * s) });
    }
    select(&list, branch).ok_or(Error::BranchUnavailable { branch: branch.name(), i, theta: wrap_2pi(phi - i * s) })
}

/// `τ*(I, θ)`: the crossing of the segment `R_θ(I)` (`s = 0`).
pub fn tau_star(params: &ModelParams, i: f64, theta: f64, crest: CrestType, branch: Branch) -> Result<TauStar> {
    tau_star_at(params, i, theta, 0.0, crest, branch)
}

/// `G(τ)` at a resolved crossing; zero up to rounding.
pub fn crossing_residual(params: &ModelParams, i: f64, phi: f64, s: f64, tau: f64) -> f64 {
    crest_slope(params, i) * (phi - i * tau).sin() + (s - tau).sin()
}

/// Principal crest height `ξ(I, ψ)`, unreduced, in `[−π/2, 3π/2]`.
fn xi_unreduced(params: &ModelParams, crest: CrestType, i: f64, psi: f64) -> Result<f64> {
    crate::crests::xi_principal(params, crest, i, psi)
}

/// `θ(ψ) = ψ − I ξ(I, ψ)`, unreduced.
pub fn theta_of_psi(params: &ModelParams, i: f64, psi: f64, crest: CrestType) -> Result<f64> {
    Ok(psi - i * xi_unreduced(params, crest, i, psi)?)
}

/// `dθ/dψ = 1 − I ∂ξ/∂ψ`.
pub fn dtheta_dpsi(params: &ModelParams, i: f64, psi: f64, crest: CrestType) -> Result<f64> {
    Ok(1.0 - i * crate::crests::xi_slope(params, crest, i, psi)?)
}

/// `𝔏*(I, ψ) = A00 + A10(I) cos ψ + A01 cos ξ(I, ψ)`; no root finding.
pub fn reduced_poincare_psi(params: &ModelParams, i: f64, psi: f64, crest: CrestType) -> Result<f64> {
    let xi = xi_unreduced(params, crest, i, psi)?;
    let c = coeffs(params, i);
    Ok(c.c00 + c.c10 * psi.cos() + c.c01 * xi.cos())
}

fn value_at(params: &ModelParams, i: f64, t: &TauStar) -> f64 {
    let c = coeffs(params, i);
    c.c00 + c.c10 * t.psi.cos() + c.c01 * t.s_crest.cos()
}

/// `𝓛*(I, θ)`: the Melnikov potential at the selected crossing.
pub fn reduced_poincare(params: &ModelParams, i: f64, theta: f64, crest: CrestType, branch: Branch) -> Result<f64> {
    let t = tau_star(params, i, theta, crest, branch)?;
    Ok(value_at(params, i, &t))
}

/// `(∂/∂I, ∂/∂θ)` of a reduced Poincaré function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gradient {
    #[serde(rename = "dI")]
    pub d_i: f64,
    #[serde(rename = "dTheta")]
    pub d_theta: f64,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.d_i.hypot(self.d_theta)
    }
}

/// Closed-form gradient at a known crossing.
///
/// The crossing is a critical point of the potential along the NHIM line, so
/// the `∂τ*/∂I` contribution drops out and only explicit terms remain.
pub fn gradient_from_crossing(params: &ModelParams, i: f64, t: &TauStar) -> Gradient {
    let a10 = a10_coeff(params, i);
    let s = t.psi.sin();
    Gradient {
        d_i: a10_coeff_prime(params, i) * t.psi.cos() + t.tau * a10 * s,
        d_theta: -a10 * s,
    }
}

fn guard(t: &TauStar, i: f64, theta: f64) -> Result<()> {
    if t.dtheta_dpsi.abs() < TANGENCY_GUARD {
        return Err(Error::TangencyPoint { i, theta });
    }
    Ok(())
}

/// Closed-form gradient of `𝓛*` at `(I, θ)`, without cross-checking.
pub fn grad_closed_form(params: &ModelParams, i: f64, theta: f64, crest: CrestType, branch: Branch) -> Result<Gradient> {
    let t = tau_star(params, i, theta, crest, branch)?;
    guard(&t, i, theta)?;
    Ok(gradient_from_crossing(params, i, &t))
}

/// Central finite-difference gradient of `𝓛*` with step `h`.
pub fn grad_finite_difference(params: &ModelParams, i: f64, theta: f64, crest: CrestType, branch: Branch, h: f64) -> Result<Gradient> {
    let f = |x: f64, y: f64| reduced_poincare(params, x, y, crest, branch);
    Ok(Gradient {
        d_i: (f(i + h, theta)? - f(i - h, theta)?) / (2.0 * h),
        d_theta: (f(i, theta + h)? - f(i, theta - h)?) / (2.0 * h),
    })
}

/// Gradient of `𝓛*`: the closed form, validated against central differences
/// (step 1e-5). If the two disagree beyond `1e-6(1 + |∇|)` the finite
/// difference is returned instead. When the difference stencil itself leaves
/// the branch domain the closed form is kept.
pub fn grad_reduced_poincare(params: &ModelParams, i: f64, theta: f64, crest: CrestType, branch: Branch) -> Result<Gradient> {
    let g = grad_closed_form(params, i, theta, crest, branch)?;
    match grad_finite_difference(params, i, theta, crest, branch, 1e-5) {
        Ok(fd) => {
            let tol = 1e-6 * (1.0 + g.norm());
            if (fd.d_i - g.d_i).abs() > tol || (fd.d_theta - g.d_theta).abs() > tol {
                Ok(fd)
            } else {
                Ok(g)
            }
        }
        Err(_) => Ok(g),
    }
}

/// Gradient of `L*(I, φ, s)` in the original angles: `(∂/∂I, ∂/∂φ)`.
pub fn grad_at(params: &ModelParams, i: f64, phi: f64, s: f64, crest: CrestType, branch: Branch) -> Result<Gradient> {
    let t = tau_star_at(params, i, phi, s, crest, branch)?;
    guard(&t, i, wrap_2pi(phi - i * s))?;
    Ok(gradient_from_crossing(params, i, &t))
}

/// Truncated scattering map `(I + ε ∂θ𝓛*, θ − ε ∂I𝓛*)`.
pub fn scattering_step(params: &ModelParams, pt: ReducedPoint, crest: CrestType, branch: Branch) -> Result<ReducedPoint> {
    if params.eps == 0.0 {
        params.require_scattering()?;
        return Ok(pt);
    }
    let g = grad_closed_form(params, pt.i, pt.theta, crest, branch)?;
    Ok(ReducedPoint::new(pt.i + params.eps * g.d_theta, pt.theta - params.eps * g.d_i))
}

/// Truncated map in `(I, φ, s)` coordinates; `s` is unchanged.
pub fn scattering_step_at(params: &ModelParams, i: f64, phi: f64, s: f64, crest: CrestType, branch: Branch) -> Result<(f64, f64)> {
    if params.eps == 0.0 {
        return Ok((i, wrap_2pi(phi)));
    }
    let g = grad_at(params, i, phi, s, crest, branch)?;
    Ok((i + params.eps * g.d_theta, wrap_2pi(phi - params.eps * g.d_i)))
}

fn branch_domains(params: &ModelParams, i: f64, crest: CrestType) -> Option<BranchDomains> {
    if crest != CrestType::Maximum || params.mu() <= 0.0 {
        return None;
    }
    let t = tangency_points(params, i)?;
    let th = |psi: f64| theta_of_psi(params, i, psi, crest).unwrap_or(f64::NAN);
    let psi1_tilde = bisect(|p| th(p) - t.theta1, t.psi2, TAU, 1e-13)?;
    let psi2_tilde = bisect(|p| th(p) - t.theta2, 0.0, t.psi1, 1e-13)?;
    Some(BranchDomains {
        tangency: t,
        psi1_tilde,
        psi2_tilde,
        a: vec![(0.0, psi2_tilde), (t.psi2, TAU)],
        b: vec![(0.0, t.psi1), (psi1_tilde, TAU)],
        c: vec![(0.0, psi2_tilde), (t.psi1, t.psi2), (psi1_tilde, TAU)],
    })
}

/// Branches available at `(I, θ)` on the given crest.
///
/// One crossing gives `[Single]`; several give the `A`/`B`/`C` branches that
/// can be resolved. At `θ = θ₁` or `θ₂` exactly, both merging branches are
/// reported alongside the third. No crossing gives an empty set (a hole).
pub fn scattering_branches(params: &ModelParams, i: f64, theta: f64, crest: CrestType) -> BranchSet {
    let theta = wrap_2pi(theta);
    let list = crossings(params, i, theta, 0.0, crest).unwrap_or_default();
    let domains = branch_domains(params, i, crest);
    let mut available = Vec::new();
    let at_fold = domains.as_ref().is_some_and(|d| {
        let near = |x: f64| crate::num::angle_diff(theta, x).abs() <= 1e-12;
        near(d.tangency.theta1) || near(d.tangency.theta2)
    });
    if at_fold {
        available = vec![Branch::A, Branch::B, Branch::C];
    } else if list.len() == 1 {
        available.push(Branch::Single);
    } else if list.len() > 1 {
        for b in [Branch::A, Branch::B, Branch::C] {
            if select(&list, b).is_some() {
                available.push(b);
            }
        }
        available.dedup();
    }
    BranchSet { available, crossings: list.iter().map(|c| c.psi).collect(), domains }
}

/// Outcome of comparing both sides of the `μ ↦ −μ` symmetry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub max_discrepancy: f64,
    pub compared: usize,
    /// Grid points skipped because a side had several crossings or none.
    pub skipped: usize,
}

/// Checks `S_{μ,m}(I, φ, π) = S_{−μ,M}(I, φ, 0)` on an `n × n` grid of
/// `I ∈ [i_lo, i_hi]`, `φ ∈ [0, 2π)`. `−μ` is realised by flipping `a01`.
pub fn symmetry_check_mu_grid(params: &ModelParams, n: usize, i_lo: f64, i_hi: f64) -> SymmetryReport {
    let flipped = params.mirrored_mu();
    let mut rep = SymmetryReport { max_discrepancy: 0.0, compared: 0, skipped: 0 };
    for a in 0..n {
        let i = if n == 1 { i_lo } else { i_lo + (i_hi - i_lo) * a as f64 / (n - 1) as f64 };
        for b in 0..n {
            let phi = TAU * (b as f64 + 0.5) / n as f64;
            let single = |p: &ModelParams, s, c| crossings(p, i, phi, s, c).map(|l| l.len() == 1).unwrap_or(false);
            if !single(params, PI, CrestType::Minimum) || !single(&flipped, 0.0, CrestType::Maximum) {
                rep.skipped += 1;
                continue;
            }
            let lhs = scattering_step_at(params, i, phi, PI, CrestType::Minimum, Branch::Single);
            let rhs = scattering_step_at(&flipped, i, phi, 0.0, CrestType::Maximum, Branch::Single);
            match (lhs, rhs) {
                (Ok(l), Ok(r)) => {
                    let d = (l.0 - r.0).abs().max(crate::num::angle_diff(l.1, r.1).abs());
                    rep.max_discrepancy = rep.max_discrepancy.max(d);
                    rep.compared += 1;
                }
                _ => rep.skipped += 1,
            }
        }
    }
    rep
}

/// [`symmetry_check_mu_grid`] on the default 20×20 grid over `I ∈ [−3, 3]`.
pub fn symmetry_check_mu(params: &ModelParams) -> SymmetryReport {
    symmetry_check_mu_grid(params, 20, -3.0, 3.0)
}

/// Flow of the planar Hamiltonian system `İ = ∂θ𝓛*`, `θ̇ = −∂I𝓛*` for time `t`.
pub fn flow_reduced_hamiltonian(params: &ModelParams, pt: ReducedPoint, t: f64, crest: CrestType, branch: Branch) -> Result<ReducedPoint> {
    params.require_scattering()?;
    if t == 0.0 {
        return Ok(pt);
    }
    let opts = OdeOptions { rtol: 1e-12, atol: 1e-13, h_max: 0.05, ..OdeOptions::default() };
    let rhs = |time: f64, y: &[f64; 2]| {
        grad_closed_form(params, y[0], wrap_2pi(y[1]), crest, branch)
            .map(|g| [g.d_theta, -g.d_i])
            .map_err(|e| Error::DomainExit { t: time, reason: e.to_string() })
    };
    let sol = integrate(rhs, 0.0, [pt.i, pt.theta], t, &opts)?;
    let y = sol.last();
    Ok(ReducedPoint::new(y[0], y[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crests::xi;
    use crate::model::alpha;
    use proptest::prelude::*;
    use CrestType::{Maximum as M, Minimum as Mn};

    fn mu(m: f64) -> ModelParams {
        ModelParams::with_mu(m, 1.0, 0.01).unwrap()
    }

    #[test]
    fn on_crest_gives_zero_tau() {
        let p = mu(0.6);
        for &(i, phi) in &[(1.2, 0.7), (-2.0, 4.0), (0.3, 2.9)] {
            let s = xi(&p, M, i, phi).unwrap();
            let s = if s > PI { s - TAU } else { s };
            let t = tau_star_at(&p, i, phi, s, M, Branch::Single).unwrap();
            assert!(t.tau.abs() < 1e-12, "tau = {}", t.tau);
        }
    }

    #[test]
    fn dense_grid_oracle() {
        let p = mu(0.6);
        let (i, theta) = (1.2, 1.0);
        let t = tau_star(&p, i, theta, M, Branch::Single).unwrap();
        assert!(crossing_residual(&p, i, theta, 0.0, t.tau).abs() <= 1e-12);
        // brute force: smallest |G| over a fine grid of the Max-crest part of the window
        let k = crest_slope(&p, i);
        let n = 2_000_000;
        let mut best = (f64::MAX, 0.0);
        for j in 0..=n {
            let tau = -FRAC_PI_2 + PI * j as f64 / n as f64;
            let g = (k * (theta - i * tau).sin() - tau.sin()).abs();
            if g < best.0 {
                best = (g, tau);
            }
        }
        assert!((best.1 - t.tau).abs() < 1e-5, "{} vs {}", best.1, t.tau);
        assert!((t.psi - wrap_2pi(theta - i * t.tau)).abs() < 1e-15);
    }

    #[test]
    fn residual_at_every_root() {
        for &m in &[0.6, 0.9, 1.5] {
            let p = mu(m);
            for a in 0..30 {
                let i = -3.0 + 6.0 * a as f64 / 29.0;
                for b in 0..30 {
                    let theta = TAU * b as f64 / 30.0;
                    for c in [M, Mn] {
                        if let Ok(list) = crossings(&p, i, theta, 0.0, c) {
                            for t in list {
                                let r = crossing_residual(&p, i, theta, 0.0, t.tau);
                                assert!(r.abs() <= 1e-12, "mu={m} I={i} theta={theta} r={r}");
                                // equivalent form with the Melnikov coefficients
                                let cf = coeffs(&p, i);
                                let r2 = i * cf.c10 * t.psi.sin() + cf.c01 * t.s_crest.sin();
                                assert!(r2.abs() <= 1e-11 * (1.0 + cf.c01.abs()));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn psi_zero_value() {
        let p = ModelParams { a00: 0.3, ..mu(0.6) };
        let c = coeffs(&p, 1.1);
        let v = reduced_poincare(&p, 1.1, 0.0, M, Branch::Single).unwrap();
        assert!((v - (c.c00 + c.c10 + c.c01)).abs() < 1e-12);
        assert!((reduced_poincare_psi(&p, 1.1, 0.0, M).unwrap() - (c.c00 + c.c10 + c.c01)).abs() < 1e-14);
        assert!((reduced_poincare_psi(&p, 1.1, PI, M).unwrap() - (c.c00 - c.c10 + c.c01)).abs() < 1e-14);
    }

    #[test]
    fn evenness_and_psi_consistency() {
        for &m in &[0.6, -0.4] {
            let p = mu(m);
            for a in 0..20 {
                let i = -3.0 + 6.0 * a as f64 / 19.0;
                for b in 0..20 {
                    let theta = TAU * (b as f64 + 0.25) / 20.0;
                    let v = reduced_poincare(&p, i, theta, M, Branch::Single).unwrap();
                    let w = reduced_poincare(&p, -i, theta, M, Branch::Single).unwrap();
                    assert!((v - w).abs() <= 1e-12);
                    let t = tau_star(&p, i, theta, M, Branch::Single).unwrap();
                    let vp = reduced_poincare_psi(&p, i, t.psi, M).unwrap();
                    assert!((v - vp).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn dtheta_at_quarter_turn() {
        let p = mu(0.6);
        let i = 0.8;
        let theta = theta_of_psi(&p, i, FRAC_PI_2, M).unwrap();
        let g = grad_closed_form(&p, i, theta, M, Branch::Single).unwrap();
        assert!((g.d_theta + a10_coeff(&p, i)).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_of_theta_in_psi() {
        let p = mu(0.9);
        for &i in &[1.2, 1.5, 2.0, 3.0] {
            let t = tangency_points(&p, i).unwrap();
            for j in 1..200 {
                let psi = TAU * j as f64 / 200.0;
                let d = dtheta_dpsi(&p, i, psi, M).unwrap();
                if (psi - t.psi1).abs() < 1e-3 || (psi - t.psi2).abs() < 1e-3 {
                    continue;
                }
                if psi > t.psi1 && psi < t.psi2 {
                    assert!(d < 0.0);
                } else {
                    assert!(d > 0.0);
                }
            }
        }
    }

    #[test]
    fn gradient_matches_differences_on_grid() {
        for &m in &[0.6, 0.9] {
            let p = mu(m);
            for a in 0..25 {
                let i = -3.5 + 7.0 * a as f64 / 24.0;
                for b in 0..25 {
                    let theta = TAU * (b as f64 + 0.3) / 25.0;
                    let set = scattering_branches(&p, i, theta, M);
                    for &br in &set.available {
                        let Ok(g) = grad_closed_form(&p, i, theta, M, br) else { continue };
                        let Ok(t) = tau_star(&p, i, theta, M, br) else { continue };
                        if t.dtheta_dpsi.abs() < 1e-2 {
                            continue;
                        }
                        let Ok(fd) = grad_finite_difference(&p, i, theta, M, br, 1e-5) else { continue };
                        let tol = 1e-6 * (1.0 + g.norm());
                        assert!((g.d_i - fd.d_i).abs() <= tol, "mu={m} I={i} th={theta} {br:?}: {g:?} vs {fd:?}");
                        assert!((g.d_theta - fd.d_theta).abs() <= tol);
                    }
                }
            }
        }
    }

    #[test]
    fn validated_gradient_agrees_with_closed_form() {
        let p = mu(0.6);
        let a = grad_reduced_poincare(&p, 1.3, 2.0, M, Branch::Single).unwrap();
        let b = grad_closed_form(&p, 1.3, 2.0, M, Branch::Single).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn step_identity_at_zero_eps() {
        let p = mu(0.6).with_eps(0.0);
        let pt = ReducedPoint::new(1.3, 4.0);
        assert_eq!(scattering_step(&p, pt, M, Branch::Single).unwrap(), pt);
        assert_eq!(scattering_step_at(&p, 1.3, 4.0, 0.0, M, Branch::Single).unwrap(), (1.3, 4.0));
    }

    #[test]
    fn step_level_change_is_quadratic() {
        let base = mu(0.6);
        let pt = ReducedPoint::new(1.0, 4.2);
        let change = |eps: f64| {
            let p = base.with_eps(eps);
            let q = scattering_step(&p, pt, M, Branch::Single).unwrap();
            (reduced_poincare(&p, q.i, q.theta, M, Branch::Single).unwrap()
                - reduced_poincare(&p, pt.i, pt.theta, M, Branch::Single).unwrap())
            .abs()
        };
        let (c1, c2, c3) = (change(1e-2), change(5e-3), change(2.5e-3));
        for r in [c1 / c2, c2 / c3] {
            assert!((3.0..=5.0).contains(&r), "ratio {r}");
        }
    }

    #[test]
    fn step_mirrors_in_action() {
        let p = mu(0.6).with_eps(0.02);
        for &(i, theta) in &[(1.0, 4.2), (2.5, 0.4), (0.2, 3.0)] {
            let a = scattering_step(&p, ReducedPoint::new(i, theta), M, Branch::Single).unwrap();
            let b = scattering_step(&p, ReducedPoint::new(-i, theta), M, Branch::Single).unwrap();
            let gi = grad_closed_form(&p, i, theta, M, Branch::Single).unwrap();
            let gm = grad_closed_form(&p, -i, theta, M, Branch::Single).unwrap();
            // ∂θ𝓛* is even in I and ∂I𝓛* is odd
            assert!((gi.d_theta - gm.d_theta).abs() < 1e-12);
            assert!((gi.d_i + gm.d_i).abs() < 1e-12);
            assert!(((a.i - i) - (b.i + i)).abs() < 1e-12);
            assert!(crate::num::angle_diff(a.theta - theta, -(b.theta - theta)).abs() < 1e-12);
        }
    }

    #[test]
    fn branch_counts_by_regime() {
        let p = mu(0.5);
        for a in 0..20 {
            for b in 0..20 {
                let set = scattering_branches(&p, -4.0 + 0.4 * a as f64, TAU * b as f64 / 20.0, M);
                assert_eq!(set.available, vec![Branch::Single]);
            }
        }
        let p = mu(0.9);
        let t = tangency_points(&p, 1.5).unwrap();
        let mid = 0.5 * (t.theta1 + t.theta2);
        let set = scattering_branches(&p, 1.5, mid, M);
        assert_eq!(set.available, vec![Branch::A, Branch::B, Branch::C]);
        let d = set.domains.unwrap();
        assert!(d.psi1_tilde >= t.psi2 && d.psi2_tilde <= t.psi1);
        let psi = |b| tau_star(&p, 1.5, mid, M, b).unwrap().psi;
        assert!(psi(Branch::A) > d.tangency.psi2 && psi(Branch::A) < d.psi1_tilde);
        assert!(psi(Branch::B) > d.psi2_tilde && psi(Branch::B) < d.tangency.psi1);
        assert!(psi(Branch::C) > d.tangency.psi1 && psi(Branch::C) < d.tangency.psi2);
        // outside the band only one crossing remains
        let out = scattering_branches(&p, 1.5, t.theta2 - 0.3, M);
        assert_eq!(out.available, vec![Branch::Single]);
        // exactly at the fold all adjacent branches are reported
        let fold = scattering_branches(&p, 1.5, t.theta1, M);
        assert_eq!(fold.available.len(), 3);
    }

    #[test]
    fn holes_band_is_empty() {
        let p = mu(1.5);
        let set = scattering_branches(&p, 0.8, 2.4, M);
        assert!(set.available.is_empty(), "{set:?}");
        assert!(matches!(tau_star(&p, 0.8, 2.4, M, Branch::Single), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn empty_sets_only_for_vertical_crests() {
        for &m in &[0.6, 0.9, 1.5, 2.5] {
            let p = mu(m);
            for a in 0..40 {
                let i = -3.0 + 6.0 * (a as f64 + 0.5) / 40.0;
                for b in 0..40 {
                    let theta = TAU * b as f64 / 40.0;
                    if scattering_branches(&p, i, theta, M).available.is_empty() {
                        assert!((m * alpha(i)).abs() > 1.0, "mu={m} I={i} theta={theta}");
                    }
                }
            }
        }
    }

    #[test]
    fn singular_crest_rejected() {
        assert!(matches!(tau_star(&mu(1.0), 1.0, 0.5, M, Branch::Single), Err(Error::SingularCrest(_))));
    }

    #[test]
    fn tangency_guard() {
        let p = mu(0.9);
        let t = tangency_points(&p, 1.5).unwrap();
        let r = grad_closed_form(&p, 1.5, wrap_2pi(t.theta1), M, Branch::Single);
        // at the fold the selected crossing is either the tangent one (rejected)
        // or the transversal A crossing
        if let Ok(g) = r {
            assert!(g.d_theta.is_finite());
        }
        assert!(dtheta_dpsi(&p, 1.5, t.psi1, M).unwrap().abs() < 1e-8);
    }

    #[test]
    fn mu_symmetry() {
        for &m in &[0.6, 0.9] {
            let rep = symmetry_check_mu(&mu(m).with_eps(0.05));
            assert!(rep.max_discrepancy <= 1e-10, "{rep:?}");
            assert!(rep.compared > 200);
        }
        let rep = symmetry_check_mu(&mu(0.6).with_eps(0.0));
        assert_eq!(rep.max_discrepancy, 0.0);
    }

    #[test]
    fn flow_conserves_level() {
        let p = mu(0.6);
        let pt = ReducedPoint::new(0.5, 4.0);
        assert_eq!(flow_reduced_hamiltonian(&p, pt, 0.0, M, Branch::Single).unwrap(), pt);
        let l0 = reduced_poincare(&p, pt.i, pt.theta, M, Branch::Single).unwrap();
        let mut q = pt;
        for _ in 0..10 {
            q = flow_reduced_hamiltonian(&p, q, 1.0, M, Branch::Single).unwrap();
            let l = reduced_poincare(&p, q.i, q.theta, M, Branch::Single).unwrap();
            assert!((l - l0).abs() <= 1e-8);
        }
    }

    #[test]
    fn flow_reports_domain_exit() {
        let p = mu(1.5);
        // starting below the hole band and flowing up into vertical-crest actions
        let r = flow_reduced_hamiltonian(&p, ReducedPoint::new(0.2, 2.4), 50.0, M, Branch::Single);
        if let Err(e) = r {
            assert!(matches!(e, Error::DomainExit { .. }));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn shift_identity(i in -3.0f64..3.0, phi in 0.0f64..TAU, sig in -0.7f64..0.7) {
            let p = mu(0.6);
            let s = 0.2;
            let t0 = tau_star_at(&p, i, phi, s, M, Branch::Single).unwrap();
            let t1 = tau_star_at(&p, i, phi - i * sig, s - sig, M, Branch::Single).unwrap();
            prop_assert!((t1.tau - (t0.tau - sig)).abs() < 1e-12);
        }

        #[test]
        fn gradient_envelope_identity(i in -4.0f64..4.0, theta in 0.0f64..TAU) {
            let p = mu(0.6);
            let g = grad_closed_form(&p, i, theta, M, Branch::Single).unwrap();
            let fd = grad_finite_difference(&p, i, theta, M, Branch::Single, 1e-5).unwrap();
            let tol = 1e-6 * (1.0 + g.norm());
            prop_assert!((g.d_i - fd.d_i).abs() <= tol);
            prop_assert!((g.d_theta - fd.d_theta).abs() <= tol);
        }
    }
}
