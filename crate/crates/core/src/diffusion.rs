//! Pseudo-orbits mixing scattering steps with inner rotations, ergodization
//! times, and the diffusion-time bookkeeping.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::crests::{classify_regime, critical_actions, extrema, CrestType, Regime};
use crate::highways::{highway_point, highway_theta, Side};
use crate::model::{a10_coeff, alpha, ModelParams};
use crate::num::quad::integrate;
use crate::num::{angle_diff, wrap_2pi, wrap_pi};
use crate::scattering::{grad_closed_form, scattering_step, tau_star, Branch, ReducedPoint};
use crate::{Error, Result};

/// Default exponent of `N_ss = ⌈ε^{−c}⌉`.
pub const DEFAULT_C: f64 = 0.5;
/// Default exponent of the inner accuracy `ε^a`.
pub const DEFAULT_A: f64 = 0.25;
/// Default `O(ε²)` remainder constant of the scattering map.
pub const DEFAULT_K2: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    Scattering,
    Inner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub mechanism: Mechanism,
    pub points: Vec<ReducedPoint>,
    /// Scattering legs: slow time `steps · ε` of the reduced flow.
    /// Inner legs: rotation time `2πk`.
    pub model_time: f64,
    /// Branch used by a scattering leg; `None` for inner legs.
    pub branch: Option<Branch>,
}

impl Leg {
    pub fn steps(&self) -> usize {
        match self.mechanism {
            Mechanism::Scattering => self.points.len().saturating_sub(1),
            Mechanism::Inner => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbit {
    pub legs: Vec<Leg>,
    pub side: Side,
    /// Step budget per scattering leg.
    pub n_ss: usize,
    pub c: f64,
    pub a: f64,
}

impl PseudoOrbit {
    pub fn scattering_steps(&self) -> usize {
        self.legs.iter().map(Leg::steps).sum()
    }

    pub fn last_point(&self) -> Option<ReducedPoint> {
        self.legs.last().and_then(|l| l.points.last().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ergodization {
    pub k: u64,
    /// Integer with `|I k − l|` minimal.
    pub l: i64,
    #[serde(rename = "Ti")]
    pub ti: f64,
}

fn check_exponents(c: f64, a: f64) -> Result<()> {
    if !(0.0 < a && a < c && c < 1.0) {
        return Err(Error::InvalidParams(format!("need 0 < a < c < 1, got a={a}, c={c}")));
    }
    Ok(())
}

/// `N = ⌈2π/ε^a − 1⌉`, the Dirichlet bound on the return multiple.
pub fn dirichlet_bound(eps: f64, a: f64) -> u64 {
    (TAU / eps.powf(a) - 1.0).ceil().max(1.0) as u64
}

fn frac_dist(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Smallest `k ≤ N` with `2π |Ik − l| < ε^a`, found among the
/// continued-fraction denominators of `I`.
///
/// A minimal such `k` is always a convergent denominator: between two
/// consecutive denominators the distance `‖kI‖` cannot beat the smaller one.
pub fn inner_ergodization_time(i: f64, eps: f64, a: f64) -> Result<Ergodization> {
    let tol = eps.powf(a);
    if !(tol > 0.0 && tol < TAU) {
        return Err(Error::InvalidParams(format!("need 0 < eps^a < 2π, got {tol}")));
    }
    if i.abs() <= eps {
        return Err(Error::DegenerateAction(i.abs()));
    }
    let n = dirichlet_bound(eps, a);
    let target = tol / TAU;
    let x = i.abs();
    let mut best: Option<(u64, f64)> = None;
    // convergent denominators q_{-1} = 0, q_0 = 1, q_{j+1} = a_{j+1} q_j + q_{j-1}
    let (mut q_prev, mut q) = (0u64, 1u64);
    let mut rem = x.fract();
    loop {
        if q > n {
            break;
        }
        let d = frac_dist(x * q as f64);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((q, d));
        }
        if d < target {
            break;
        }
        if rem < 1e-15 {
            break;
        }
        let inv = 1.0 / rem;
        let aj = inv.floor();
        rem = inv - aj;
        let next = (aj as u64).saturating_mul(q).saturating_add(q_prev);
        q_prev = q;
        q = next;
    }
    let (k, _) = best.expect("q_0 = 1 is always examined");
    let l = (i * k as f64).round() as i64;
    Ok(Ergodization { k, l, ti: TAU * k as f64 })
}

struct Builder<'a> {
    params: &'a ModelParams,
    side: Side,
    i_end: f64,
    dir: f64,
    n_ss: usize,
    n_inner: u64,
    /// `(I_+, I_++)` when branch-A legs are used inside the band.
    band: Option<(f64, f64)>,
    c: f64,
    a: f64,
}

/// How far past the Dirichlet bound an inner leg may search for a landing
/// within `ε^a` of the highway.
pub const INNER_SCAN_FACTOR: u64 = 10_000;

/// ψ-margin keeping branch-A legs away from the fold and from `sin ψ = 0`.
const WINDOW_MARGIN: f64 = 0.05;

impl Builder<'_> {
    fn in_band(&self, i: f64) -> bool {
        self.band.is_some_and(|(lo, hi)| i.abs() >= lo && i.abs() <= hi)
    }

    fn branch_at(&self, i: f64) -> Branch {
        if self.in_band(i) {
            Branch::A
        } else {
            Branch::Single
        }
    }

    fn reached(&self, i: f64) -> bool {
        (i - self.i_end) * self.dir >= 0.0
    }

    /// Admissible θ-window for branch-A legs: the crossing drives `I` in the
    /// wanted direction and sits on an increasing piece of `θ(ψ)`.
    fn in_window(&self, pt: ReducedPoint) -> bool {
        let Ok(t) = tau_star(self.params, pt.i, pt.theta, CrestType::Maximum, Branch::A) else {
            return false;
        };
        let drive = -a10_coeff(self.params, pt.i).signum() * t.psi.sin() * self.dir;
        drive > WINDOW_MARGIN && t.dtheta_dpsi > WINDOW_MARGIN
    }

    fn scattering_leg(&self, start: ReducedPoint) -> Result<Leg> {
        let mut pts = vec![start];
        let mut cur = start;
        let branch = self.branch_at(start.i);
        let leg_end = 10.0 * self.params.eps * self.params.eps;
        for _ in 0..self.n_ss {
            let b = self.branch_at(cur.i);
            cur = scattering_step(self.params, cur, CrestType::Maximum, b)?;
            pts.push(cur);
            if self.reached(cur.i) {
                break;
            }
            if self.in_band(cur.i) && (!self.in_window(cur) || TAU - cur.theta < leg_end) {
                break;
            }
        }
        let steps = pts.len() - 1;
        let branch = if pts.iter().any(|p| self.in_band(p.i)) { Branch::A } else { branch };
        Ok(Leg {
            mechanism: Mechanism::Scattering,
            points: pts,
            model_time: steps as f64 * self.params.eps,
            branch: Some(branch),
        })
    }

    fn rotated(&self, pt: ReducedPoint, k: u64) -> ReducedPoint {
        ReducedPoint::new(pt.i, pt.theta + TAU * pt.i * k as f64)
    }

    /// Rotation multiple that brings θ back within `ε^a` of the highway.
    ///
    /// Among `k ≤ N` the closest landing wins (ties: smallest `k`). When none
    /// of those is close enough, which happens for nearly rational `I`, the
    /// scan continues past `N` up to [`INNER_SCAN_FACTOR`]`·N` and takes the
    /// first multiple that is. Failing that, the closest landing seen is kept.
    fn highway_multiple(&self, pt: ReducedPoint, theta_h: f64) -> u64 {
        let delta = angle_diff(pt.theta, theta_h);
        let tol = self.params.eps.powf(self.a);
        let dist = |k: u64| wrap_pi(delta + TAU * pt.i * k as f64).abs();
        let mut best = (1u64, f64::INFINITY);
        for k in 1..=self.n_inner {
            let d = dist(k);
            if d < best.1 {
                best = (k, d);
            }
        }
        if best.1 < tol {
            return best.0;
        }
        for k in self.n_inner + 1..=self.n_inner * INNER_SCAN_FACTOR {
            let d = dist(k);
            if d < tol {
                return k;
            }
            if d < best.1 {
                best = (k, d);
            }
        }
        best.0
    }

    fn window_multiple(&self, pt: ReducedPoint) -> Option<u64> {
        (1..=self.n_inner).find(|&k| self.in_window(self.rotated(pt, k)))
    }

    fn inner_leg(&self, pt: ReducedPoint) -> Result<Option<Leg>> {
        if pt.i.abs() < self.params.eps.max(1e-3) {
            return Ok(None);
        }
        let k = if self.in_band(pt.i) {
            self.window_multiple(pt)
        } else {
            match highway_theta(self.params, pt.i, self.side) {
                Ok(th) => Some(self.highway_multiple(pt, th)),
                Err(_) if self.band.is_some() => self.window_multiple(pt),
                Err(e) => return Err(e),
            }
        };
        let k = k.ok_or(Error::BranchUnavailable { branch: "A", i: pt.i, theta: pt.theta })?;
        Ok(Some(Leg {
            mechanism: Mechanism::Inner,
            points: vec![pt, self.rotated(pt, k)],
            model_time: TAU * k as f64,
            branch: None,
        }))
    }

    fn run(&self, start: ReducedPoint) -> Result<PseudoOrbit> {
        let mut legs = Vec::new();
        let mut cur = start;
        let max_legs = 10_000_000 / self.n_ss.max(1);
        for _ in 0..max_legs {
            let leg = self.scattering_leg(cur)?;
            let end = *leg.points.last().unwrap();
            let gain = (end.i - cur.i) * self.dir;
            legs.push(leg);
            cur = end;
            if self.reached(cur.i) {
                return Ok(PseudoOrbit { legs, side: self.side, n_ss: self.n_ss, c: self.c, a: self.a });
            }
            if !(gain >= self.params.eps * 1e-3) {
                return Err(Error::StalledProgress { i: cur.i, gain });
            }
            if let Some(inner) = self.inner_leg(cur)? {
                cur = *inner.points.last().unwrap();
                legs.push(inner);
            }
        }
        Err(Error::StalledProgress { i: cur.i, gain: 0.0 })
    }
}

fn n_ss(eps: f64, c: f64) -> usize {
    eps.powf(-c).ceil() as usize
}

/// Side whose highway pushes `I` upwards for the sign of `a10`.
pub fn rising_side(params: &ModelParams) -> Side {
    if params.a10 >= 0.0 {
        Side::Right
    } else {
        Side::Left
    }
}

/// Pseudo-orbit following a highway from `i_start` to `i_end`.
///
/// Scattering legs of at most `N_ss` steps alternate with inner rotations
/// chosen among the first `⌈2π/ε^a − 1⌉` multiples of `2π` to bring θ back
/// towards the highway. Inner legs are skipped for `|I| < max(ε, 10⁻³)`.
pub fn build_pseudo_orbit_highway(params: &ModelParams, i_start: f64, i_end: f64, side: Side, c: f64, a: f64) -> Result<PseudoOrbit> {
    params.require_scattering()?;
    check_exponents(c, a)?;
    if params.eps == 0.0 {
        return Err(Error::StalledProgress { i: i_start, gain: 0.0 });
    }
    let dir = if i_end >= i_start { 1.0 } else { -1.0 };
    let tr = crate::highways::trace_highway(params, side, i_start, i_end, 1e-2);
    if let Some(e) = tr.error {
        return Err(e);
    }
    let start = highway_point(params, i_start, side)?;
    let g = grad_closed_form(params, start.i, start.theta, CrestType::Maximum, Branch::Single)?;
    if g.d_theta * dir <= 0.0 {
        return Err(Error::InvalidParams(format!("the {side:?} highway does not drive I towards {i_end}")));
    }
    let b = Builder {
        params,
        side,
        i_end,
        dir,
        n_ss: n_ss(params.eps, c),
        n_inner: dirichlet_bound(params.eps, a),
        band: None,
        c,
        a,
    };
    b.run(ReducedPoint::new(start.i, start.theta))
}

/// Pseudo-orbit from `−I*` to `I*` in any regime.
///
/// In the single-map regime this is the highway builder on the rising side.
/// Otherwise steps with `|I| ∈ [I_+, I_++]` use branch `A`, and inner legs
/// there pick the smallest rotation that re-enters the admissible θ-window
/// where the crossing drives `I` upwards. Outside the band the orbit follows
/// the highway as usual. Negative actions are built forward as well: by
/// evenness they have the same branch structure as positive ones.
pub fn build_pseudo_orbit_general(params: &ModelParams, i_star: f64, c: f64, a: f64) -> Result<PseudoOrbit> {
    params.require_scattering()?;
    check_exponents(c, a)?;
    let side = rising_side(params);
    let i_star = i_star.abs();
    if classify_regime(params).regime == Regime::SingleMap {
        return build_pseudo_orbit_highway(params, -i_star, i_star, side, c, a);
    }
    if params.eps == 0.0 {
        return Err(Error::StalledProgress { i: -i_star, gain: 0.0 });
    }
    let band = match critical_actions(params) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return build_pseudo_orbit_highway(params, -i_star, i_star, side, c, a),
    };
    let b = Builder {
        params,
        side,
        i_end: i_star,
        dir: 1.0,
        n_ss: n_ss(params.eps, c),
        n_inner: dirichlet_bound(params.eps, a),
        band: Some(band),
        c,
        a,
    };
    let start = if b.in_band(-i_star) {
        let guess = ReducedPoint::new(-i_star, 1.5 * PI);
        if b.in_window(guess) {
            guess
        } else {
            (0..400)
                .map(|j| ReducedPoint::new(-i_star, TAU * j as f64 / 400.0))
                .find(|p| b.in_window(*p))
                .ok_or(Error::BranchUnavailable { branch: "A", i: -i_star, theta: 1.5 * PI })?
        }
    } else {
        let h = highway_point(params, -i_star, side)?;
        ReducedPoint::new(h.i, h.theta)
    };
    b.run(start)
}

/// `∫₀ˣ sinh σ / σ dσ`.
pub fn shi(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if x < 0.0 {
        return -shi(-x);
    }
    if x < 2.0 {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        loop {
            // term_k = x^{2k+1}/(2k+1)!, series term = term_k/(2k+1)
            k += 1.0;
            term *= x2 / ((2.0 * k) * (2.0 * k + 1.0));
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add < 1e-17 * sum {
                return sum;
            }
        }
    }
    let sinhc = |s: f64| if s.abs() < 1e-8 { 1.0 } else { s.sinh() / s };
    integrate(sinhc, 0.0, x, 0.0, 1e-15).value
}

fn ts_integrand(params: &ModelParams, i: f64, side: Side) -> Result<f64> {
    let h = highway_point(params, i, side)?;
    Ok(-1.0 / (a10_coeff(params, i) * h.psi.sin()))
}

/// Slow diffusion time `∫ −1/(A10(I) sin ψ_h(I)) dI` along the highway.
pub fn time_ts(params: &ModelParams, i0: f64, i_f: f64, side: Side) -> Result<f64> {
    params.require_scattering()?;
    let mut failure = None;
    let q = integrate(
        |i| match ts_integrand(params, i, side) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        i0,
        i_f,
        1e-9,
        1e-12,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(q.value),
    }
}

/// `T_s` over `[−I*, I*]`, computed as twice the half interval.
pub fn time_ts_symmetric(params: &ModelParams, i_star: f64, side: Side) -> Result<f64> {
    Ok(2.0 * time_ts(params, 0.0, i_star.abs(), side)?)
}

/// Lower bound `(Shi(I_f π/2) − Shi(I_0 π/2)) / (2π |a10|)` for `T_s`.
pub fn time_ts_lower_bound(params: &ModelParams, i0: f64, i_f: f64) -> f64 {
    (shi(i_f * FRAC_PI_2) - shi(i0 * FRAC_PI_2)) / (TAU * params.a10.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicTime {
    #[serde(rename = "Th")]
    pub th: f64,
    pub delta: f64,
    #[serde(rename = "C")]
    pub c: f64,
    /// `max α` over `[0, I*]`.
    pub alpha_max: f64,
}

/// `max α` over `[0, |I*|]`; `α` grows up to `I_α` and decays after.
pub fn alpha_max_on(i_star: f64) -> f64 {
    let e = extrema();
    let x = i_star.abs();
    if x >= e.i_alpha {
        e.alpha_max
    } else {
        alpha(x)
    }
}

/// Time `T_h = 2 log(C/ε)` of one excursion along the separatrix.
pub fn time_th(params: &ModelParams, i_star: f64) -> Result<HomoclinicTime> {
    if !(params.eps > 0.0) {
        return Err(Error::InvalidParams("eps must be positive".into()));
    }
    let am = alpha_max_on(i_star);
    let ma = params.mu().abs() * am;
    if ma >= 1.0 {
        return Err(Error::ConstantUndefined(ma));
    }
    let c = 16.0 * params.a10.abs() * (1.0 + 1.465 / (1.0 - ma * ma).sqrt());
    let delta = 4.0 * 2f64.sqrt() * params.eps / c;
    Ok(HomoclinicTime { th: 2.0 * (4.0 * 2f64.sqrt() / delta).ln(), delta, c, alpha_max: am })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTimeEstimate {
    #[serde(rename = "Ts")]
    pub ts: f64,
    #[serde(rename = "Ns")]
    pub ns: u64,
    #[serde(rename = "Nss")]
    pub nss: u64,
    #[serde(rename = "Th")]
    pub th: f64,
    /// Upper bound `2π⌈2π/ε^a − 1⌉` on one ergodization time.
    #[serde(rename = "Ti")]
    pub ti: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "Td")]
    pub td: f64,
    pub delta: f64,
    /// `(T_s/ε) · 2 log(C/ε)`.
    pub asymptotic: f64,
    /// `T_d / asymptotic`.
    pub ratio: f64,
    /// `⌊N_s/N_ss⌋ T_i / T_d`.
    pub inner_share: f64,
}

/// Diffusion time along the rising highway over `[−I*, I*]`.
pub fn diffusion_time(params: &ModelParams, i_star: f64, c: f64, a: f64) -> Result<DiffusionTimeEstimate> {
    params.require_scattering()?;
    check_exponents(c, a)?;
    let h = time_th(params, i_star)?;
    let ts = time_ts_symmetric(params, i_star, rising_side(params))?;
    let eps = params.eps;
    let ns = (ts / eps).round() as u64;
    let nss = eps.powf(-c).ceil() as u64;
    let ti = TAU * dirichlet_bound(eps, a) as f64;
    let inner = (ns / nss) as f64 * ti;
    let td = ns as f64 * h.th + inner;
    let asymptotic = ts / eps * 2.0 * (h.c / eps).ln();
    Ok(DiffusionTimeEstimate {
        ts,
        ns,
        nss,
        th: h.th,
        ti,
        c: h.c,
        td,
        delta: h.delta,
        asymptotic,
        ratio: td / asymptotic,
        inner_share: inner / td,
    })
}

/// Region over which the error constants `L` and `K` are maximised: an
/// action interval times a θ-tube around a highway.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRegion {
    pub i_lo: f64,
    pub i_hi: f64,
    pub side: Side,
    pub half_width: f64,
    pub n_i: usize,
    pub n_theta: usize,
}

impl BoundRegion {
    pub fn around_highway(i_lo: f64, i_hi: f64, side: Side) -> Self {
        Self { i_lo: i_lo.min(i_hi), i_hi: i_lo.max(i_hi), side, half_width: 0.5, n_i: 9, n_theta: 21 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorConstants {
    /// `max ‖∇𝓛*‖`.
    pub l: f64,
    /// `max ‖D²𝓛*‖₂`, the Lipschitz constant of the reduced vector field.
    pub k: f64,
}

fn spectral_norm(m: [[f64; 2]; 2]) -> f64 {
    // largest singular value of a 2×2 matrix
    let [[a, b], [c, d]] = m;
    let s1 = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    (0.5 * (s1 + (s1 * s1 - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}

/// Grid maxima of `‖∇𝓛*‖` and of the Hessian norm over the region.
pub fn error_constants(params: &ModelParams, region: &BoundRegion) -> Result<ErrorConstants> {
    let h = 1e-4;
    let grad = |i: f64, th: f64| grad_closed_form(params, i, wrap_2pi(th), CrestType::Maximum, Branch::Single);
    let mut out = ErrorConstants { l: 0.0, k: 0.0 };
    let ni = region.n_i.max(2);
    let nt = region.n_theta.max(2);
    for a in 0..ni {
        let i = region.i_lo + (region.i_hi - region.i_lo) * a as f64 / (ni - 1) as f64;
        let center = highway_theta(params, i, region.side)?;
        for b in 0..nt {
            let th = center - region.half_width + 2.0 * region.half_width * b as f64 / (nt - 1) as f64;
            let g = grad(i, th)?;
            out.l = out.l.max(g.norm());
            let (gip, gim) = (grad(i + h, th)?, grad(i - h, th)?);
            let (gtp, gtm) = (grad(i, th + h)?, grad(i, th - h)?);
            let hess = [
                [(gip.d_i - gim.d_i) / (2.0 * h), (gtp.d_i - gtm.d_i) / (2.0 * h)],
                [(gip.d_theta - gim.d_theta) / (2.0 * h), (gtp.d_theta - gtm.d_theta) / (2.0 * h)],
            ];
            out.k = out.k.max(spectral_norm(hess));
        }
    }
    Ok(out)
}

/// `n ε² K₂ + (Lε/2)[(1 + εK)ⁿ − 1] + dev · e^{Kεn}` with known constants.
pub fn error_bound_with(eps: f64, n: usize, dev: f64, consts: &ErrorConstants, k2: f64) -> f64 {
    let n_f = n as f64;
    n_f * eps * eps * k2 + 0.5 * consts.l * eps * ((1.0 + eps * consts.k).powf(n_f) - 1.0) + dev * (consts.k * eps * n_f).exp()
}

/// Propagated error of `n` truncated steps started `dev` away from the highway.
pub fn propagated_error_bound(params: &ModelParams, n: usize, dev: f64, region: &BoundRegion, k2: f64) -> Result<f64> {
    if n == 0 {
        return Ok(dev);
    }
    let consts = error_constants(params, region)?;
    Ok(error_bound_with(params.eps, n, dev, &consts, k2))
}

/// Per-leg highway deviation of a scattering leg and its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegCheck {
    pub leg: usize,
    pub steps: usize,
    /// θ-distance to the highway at the leg's first point.
    pub dev_start: f64,
    /// θ-distance to the highway at the leg's last point.
    pub dev_end: f64,
    /// Bound with `dev = ε^a` at the leg start.
    pub bound: f64,
    /// Bound with the measured starting deviation.
    pub bound_measured: f64,
    /// `I` never decreased along the leg.
    pub monotone: bool,
}

/// θ-distance from a point to the highway at the same action. This is an
/// upper bound on the Euclidean distance to the highway curve.
pub fn highway_deviation(params: &ModelParams, pt: ReducedPoint, side: Side) -> Result<f64> {
    Ok(angle_diff(pt.theta, highway_theta(params, pt.i, side)?).abs())
}

/// Checks every scattering leg of a highway pseudo-orbit against the
/// propagated error bound.
pub fn check_orbit_against_bound(params: &ModelParams, orbit: &PseudoOrbit, k2: f64) -> Result<Vec<LegCheck>> {
    let mut out = Vec::new();
    let dev_a = params.eps.powf(orbit.a);
    for (idx, leg) in orbit.legs.iter().enumerate() {
        if leg.mechanism != Mechanism::Scattering {
            continue;
        }
        let first = leg.points[0];
        let last = *leg.points.last().unwrap();
        let region = BoundRegion::around_highway(first.i, last.i, orbit.side);
        let consts = error_constants(params, &region)?;
        let n = leg.steps();
        let dev_start = highway_deviation(params, first, orbit.side)?;
        let monotone = leg.points.windows(2).all(|w| w[1].i >= w[0].i);
        out.push(LegCheck {
            leg: idx,
            steps: n,
            dev_start,
            dev_end: highway_deviation(params, last, orbit.side)?,
            bound: error_bound_with(params.eps, n, dev_a, &consts, k2),
            bound_measured: error_bound_with(params.eps, n, dev_start, &consts, k2),
            monotone,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scattering::flow_reduced_hamiltonian;

    fn mu(m: f64, eps: f64) -> ModelParams {
        ModelParams::with_mu(m, 1.0, eps).unwrap()
    }

    fn brute_k(i: f64, eps: f64, a: f64) -> Option<u64> {
        let n = dirichlet_bound(eps, a);
        (1..=n).find(|&k| TAU * frac_dist(i * k as f64) < eps.powf(a))
    }

    #[test]
    fn exact_return_for_half() {
        let e = inner_ergodization_time(0.5, 0.01, 0.25).unwrap();
        assert_eq!(e.k, 2);
        assert!((e.ti - 2.0 * TAU).abs() < 1e-15);
        assert_eq!(e.l, 1);
    }

    #[test]
    fn convergents_match_brute_scan() {
        // ε^a = 0.05 with a = 0.5
        let eps: f64 = 0.0025;
        let a = 0.5;
        assert!((eps.powf(a) - 0.05).abs() < 1e-15);
        let i = 2f64.sqrt() - 1.0;
        let e = inner_ergodization_time(i, eps, a).unwrap();
        assert_eq!(Some(e.k), brute_k(i, eps, a));
        // 1/(√2−1) = [2; 2, 2, ...], denominators 1, 2, 5, 12, 29, ...
        assert!([1, 2, 5, 12, 29, 70].contains(&e.k));
    }

    #[test]
    fn ergodization_bounds_and_validation() {
        for j in 1..300 {
            let i = 0.013 * j as f64 + 0.06;
            for &(eps, a) in &[(0.01, 0.25), (1e-3, 0.5), (0.05, 0.3)] {
                let e = inner_ergodization_time(i, eps, a).unwrap();
                assert!(e.ti <= TAU * dirichlet_bound(eps, a) as f64);
                assert!((i * e.k as f64 - e.l as f64).abs() < eps.powf(a) / TAU, "I={i}");
                assert_eq!(Some(e.k), brute_k(i, eps, a), "I={i} eps={eps}");
            }
        }
        assert!(matches!(inner_ergodization_time(0.005, 0.01, 0.25), Err(Error::DegenerateAction(_))));
        assert!(inner_ergodization_time(0.5, 1e3, 1.0).is_err());
    }

    #[test]
    fn shi_values() {
        assert_eq!(shi(0.0), 0.0);
        for &x in &[0.3, 1.0, 1.99, 2.0, 3.5, 8.0] {
            assert_eq!(shi(-x), -shi(x));
        }
        // independent adaptive Simpson oracle
        fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let f = |s: f64| if s == 0.0 { 1.0 } else { s.sinh() / s };
        for &x in &[1.0, 3.0] {
            let (fa, fm, fb) = (f(0.0), f(0.5 * x), f(x));
            let whole = x / 6.0 * (fa + 4.0 * fm + fb);
            let oracle = simpson(&f, 0.0, x, fa, fm, fb, whole, 1e-15, 40);
            assert!((shi(x) - oracle).abs() <= 1e-12, "x={x}: {} vs {oracle}", shi(x));
        }
        assert!((shi(2.0 - 1e-12) - shi(2.0)).abs() < 1e-11);
    }

    #[test]
    fn ts_properties() {
        let p = mu(0.6, 0.01);
        let side = Side::Right;
        let half = time_ts(&p, 0.0, 2.0, side).unwrap();
        let full = time_ts(&p, -2.0, 2.0, side).unwrap();
        assert!((full - 2.0 * half).abs() <= 1e-8 * full);
        assert!((time_ts_symmetric(&p, 2.0, side).unwrap() - full).abs() <= 1e-8 * full);
        assert!(half >= time_ts_lower_bound(&p, 0.0, 2.0));
        let mut prev = 0.0;
        for k in 1..8 {
            let v = time_ts(&p, 0.0, 0.5 * k as f64, side).unwrap();
            assert!(v > prev);
            prev = v;
        }
        // independent trapezoid refinement on a uniform grid
        let f = |i: f64| ts_integrand(&p, i, side).unwrap();
        let trap = |n: usize| {
            let h = 2.0 / n as f64;
            (0..=n).map(|j| f(j as f64 * h) * if j == 0 || j == n { 0.5 } else { 1.0 }).sum::<f64>() * h
        };
        let (t1, t2) = (trap(2000), trap(4000));
        let oracle = t2 + (t2 - t1) / 3.0;
        assert!((half - oracle).abs() / oracle <= 1e-6, "{half} vs {oracle}");
    }

    #[test]
    fn th_examples() {
        let p = ModelParams::new(0.0, 0.6, 1.0, 0.01).unwrap();
        let h = time_th(&p, 4.0).unwrap();
        assert!((h.alpha_max - 1.031).abs() < 1e-3);
        assert!((h.c - 27.5).abs() < 0.1, "C = {}", h.c);
        assert!((2.0 * (4.0 * 2f64.sqrt() / h.delta).ln() - 2.0 * (h.c / p.eps).ln()).abs() < 1e-12);
        let mu = p.mu();
        let alt = 16.0 * (p.a10.abs() + 1.465 * p.a01.abs() * mu.abs() / (1.0 - mu * mu * h.alpha_max * h.alpha_max).sqrt());
        assert!((alt - h.c).abs() < 1e-12);
        assert!(matches!(time_th(&mu_p(1.5), 4.0), Err(Error::ConstantUndefined(_))));
    }

    fn mu_p(m: f64) -> ModelParams {
        mu(m, 0.01)
    }

    #[test]
    fn diffusion_time_bookkeeping() {
        let p = mu(0.6, 1e-2);
        let d = diffusion_time(&p, 2.0, DEFAULT_C, DEFAULT_A).unwrap();
        assert_eq!(d.ns, (d.ts / p.eps).round() as u64);
        assert_eq!(d.nss, 10);
        let parts = d.ns as f64 * d.th + (d.ns / d.nss) as f64 * d.ti;
        assert_eq!(d.td, parts);
        assert!(d.td.is_finite() && d.td > d.ns as f64 * d.th);
        assert!(diffusion_time(&p, 2.0, 0.3, 0.5).is_err());
    }

    #[test]
    fn error_bound_examples() {
        let p = mu(0.6, 0.01);
        let region = BoundRegion::around_highway(0.5, 1.5, Side::Right);
        assert_eq!(propagated_error_bound(&p, 0, 0.3, &region, DEFAULT_K2).unwrap(), 0.3);
        // one step against the reduced flow
        let consts = error_constants(&p, &region).unwrap();
        for k in 0..8 {
            let i = 0.6 + 0.1 * k as f64;
            let th = highway_theta(&p, i, Side::Right).unwrap() + 0.1;
            let pt = ReducedPoint::new(i, th);
            let s = scattering_step(&p, pt, CrestType::Maximum, Branch::Single).unwrap();
            let f = flow_reduced_hamiltonian(&p, pt, p.eps, CrestType::Maximum, Branch::Single).unwrap();
            let obs = (s.i - f.i).hypot(angle_diff(s.theta, f.theta));
            let bound = error_bound_with(p.eps, 1, 0.0, &consts, DEFAULT_K2);
            assert!(obs <= bound, "{obs} > {bound}");
            // also against the flow-only part of the bound
            assert!(obs <= error_bound_with(p.eps, 1, 0.0, &consts, 0.0) * 1.0001);
        }
    }

    #[test]
    fn error_bound_scaling() {
        // n = ⌈ε^{-c}⌉ and dev = ε^a: the bound is O(ε^{2−c}) + O(ε^a)
        let (c, a) = (0.5, 0.25);
        let region = BoundRegion::around_highway(0.0, 1.0, Side::Right);
        let b = |eps: f64| {
            let p = mu(0.6, eps);
            let n = eps.powf(-c).ceil() as usize;
            propagated_error_bound(&p, n, eps.powf(a), &region, DEFAULT_K2).unwrap()
        };
        let (b1, b2) = (b(1e-3), b(5e-4));
        // the ε^a term dominates: halving ε shrinks the bound by about 2^a
        let r = b1 / b2;
        assert!(r > 2f64.powf(a) * 0.95 && r < 2f64.powf(2.0 - c) * 1.05, "ratio {r}");
    }

    #[test]
    fn highway_orbit_small_case() {
        let p = mu(0.6, 0.05);
        let o = build_pseudo_orbit_highway(&p, -1.0, 1.0, Side::Right, DEFAULT_C, DEFAULT_A).unwrap();
        assert!(o.last_point().unwrap().i >= 1.0);
        let nss = 5;
        for leg in &o.legs {
            match leg.mechanism {
                Mechanism::Scattering => {
                    assert!(leg.steps() <= nss);
                    for w in leg.points.windows(2) {
                        assert!(w[1].i > w[0].i);
                        // ΔI ≈ ε A10 |sin ψ_h|
                        let g = grad_closed_form(&p, w[0].i, w[0].theta, CrestType::Maximum, Branch::Single).unwrap();
                        assert!((w[1].i - w[0].i - p.eps * g.d_theta).abs() < 1e-14);
                    }
                }
                Mechanism::Inner => {
                    let end = leg.points[1];
                    assert!(highway_deviation(&p, end, Side::Right).unwrap() <= p.eps.powf(DEFAULT_A));
                    assert_eq!(leg.points[0].i, end.i);
                }
            }
        }
    }

    #[test]
    fn step_gain_tracks_highway_slope() {
        let p = mu(0.6, 1e-3);
        for &i in &[0.5, 1.5, 2.5] {
            let h = highway_point(&p, i, Side::Right).unwrap();
            let pt = ReducedPoint::new(h.i, h.theta);
            let s = scattering_step(&p, pt, CrestType::Maximum, Branch::Single).unwrap();
            let pred = p.eps * a10_coeff(&p, i) * h.psi.sin().abs();
            assert!((s.i - i - pred).abs() <= 10.0 * p.eps * p.eps);
        }
    }

    #[test]
    fn zero_eps_stalls() {
        let p = mu(0.6, 0.0);
        assert!(matches!(
            build_pseudo_orbit_highway(&p, -1.0, 1.0, Side::Right, DEFAULT_C, DEFAULT_A),
            Err(Error::StalledProgress { .. })
        ));
    }

    #[test]
    fn wrong_direction_rejected() {
        let p = mu(0.6, 0.05);
        assert!(build_pseudo_orbit_highway(&p, -1.0, 1.0, Side::Left, DEFAULT_C, DEFAULT_A).is_err());
        let o = build_pseudo_orbit_highway(&p, 1.0, -1.0, Side::Left, DEFAULT_C, DEFAULT_A).unwrap();
        assert!(o.last_point().unwrap().i <= -1.0);
    }

    #[test]
    fn general_delegates_in_single_regime() {
        let p = mu(0.5, 0.05);
        let g = build_pseudo_orbit_general(&p, 1.5, DEFAULT_C, DEFAULT_A).unwrap();
        let h = build_pseudo_orbit_highway(&p, -1.5, 1.5, Side::Right, DEFAULT_C, DEFAULT_A).unwrap();
        assert_eq!(g, h);
    }

    #[test]
    fn general_orbit_crosses_tangency_band() {
        let p = mu(0.9, 0.01);
        let o = build_pseudo_orbit_general(&p, 2.0, DEFAULT_C, DEFAULT_A).unwrap();
        assert!(o.last_point().unwrap().i >= 2.0);
        let a_legs = o.legs.iter().filter(|l| l.branch == Some(Branch::A)).count();
        assert!(a_legs >= 1);
        let mut prev = f64::NEG_INFINITY;
        for leg in o.legs.iter().filter(|l| l.mechanism == Mechanism::Scattering) {
            for pt in &leg.points {
                assert!(pt.i >= prev);
                prev = pt.i;
                let b = leg.branch.unwrap();
                assert!(tau_star(&p, pt.i, pt.theta, CrestType::Maximum, b).is_ok());
            }
        }
    }
}
