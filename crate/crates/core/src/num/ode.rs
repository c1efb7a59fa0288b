//! Dormand-Prince 5(4) explicit Runge-Kutta, adaptive or fixed step.
//!
//! The right-hand side returns `Result` so callers whose vector field has a
//! restricted domain can abort the integration cleanly.

use crate::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Step-size control knobs.
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest allowed |h|.
    pub h_max: f64,
    /// Below this |h| the integration fails with `StepFailure`.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-12, atol: 1e-14, h_max: 0.5, h_min: 1e-12, max_steps: 5_000_000 }
    }
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rtol: tol, atol: tol * 1e-2, ..Self::default() }
    }
}

/// Accepted steps of an integration, including the initial point.
#[derive(Debug, Clone)]
pub struct OdeSolution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
}

impl<const N: usize> OdeSolution<N> {
    pub fn last(&self) -> [f64; N] {
        *self.states.last().expect("solution always holds the initial state")
    }
}

type Stages<const N: usize> = [[f64; N]; 7];

fn stages<const N: usize, F>(f: &mut F, t: f64, y: &[f64; N], k0: [f64; N], h: f64) -> Result<Stages<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut k = [[0.0; N]; 7];
    k[0] = k0;
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = f(t + C[s] * h, &ys)?;
    }
    Ok(k)
}

fn advance<const N: usize>(y: &[f64; N], k: &Stages<N>, h: f64) -> [f64; N] {
    // row 6 of A holds the fifth-order weights (first-same-as-last)
    let mut out = *y;
    for (j, kj) in k.iter().enumerate().take(6) {
        for i in 0..N {
            out[i] += h * A[6][j] * kj[i];
        }
    }
    out
}

/// Adaptive integration from `t0` to `t1` (either direction).
pub fn integrate<const N: usize, F>(mut f: F, t0: f64, y0: [f64; N], t1: f64, opts: &OdeOptions) -> Result<OdeSolution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut sol = OdeSolution { times: vec![t0], states: vec![y0] };
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(sol);
    }
    let dir = span.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k0 = f(t, &y)?;
    let mut h = dir * (1e-3f64).min(span.abs()).min(opts.h_max);
    for _ in 0..opts.max_steps {
        if (t1 - t) * dir <= 0.0 {
            return Ok(sol);
        }
        let last = (t + h - t1) * dir >= 0.0;
        if last {
            h = t1 - t;
        }
        let k = stages(&mut f, t, &y, k0, h)?;
        let ynew = advance(&y, &k, h);
        let mut err = 0.0;
        for i in 0..N {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (h * e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.25;
        } else if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = ynew;
            // FSAL: the last stage is the derivative at the new point
            k0 = k[6];
            sol.times.push(t);
            sol.states.push(y);
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = dir * (h.abs() * fac).min(opts.h_max);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
        if h.abs() < opts.h_min && (t1 - t).abs() > opts.h_min {
            return Err(Error::StepFailure(t));
        }
    }
    Err(Error::StepFailure(t))
}

/// Fixed-step fifth-order integration with `n` equal steps; returns the end state.
pub fn integrate_fixed<const N: usize, F>(mut f: F, t0: f64, y0: [f64; N], t1: f64, n: usize) -> Result<[f64; N]>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    for i in 0..n {
        let t = t0 + h * i as f64;
        let k0 = f(t, &y)?;
        let k = stages(&mut f, t, &y, k0, h)?;
        y = advance(&y, &k, h);
    }
    Ok(y)
}
