//! Bracketing root finders and a golden-section maximizer.

/// Bisection on a bracket with `f(a)·f(b) ≤ 0`.
///
/// Stops when the bracket is narrower than `xtol` or an exact zero is hit.
/// Returns `None` when the endpoints do not bracket a sign change.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= xtol || m == a || m == b {
            return Some(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Scans `[a, b]` in `n` equal cells and bisects every sign change.
pub fn all_roots<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize, xtol: f64) -> Vec<f64> {
    let h = (b - a) / n as f64;
    let mut out = Vec::new();
    let mut x0 = a;
    let mut f0 = f(x0);
    for i in 1..=n {
        let x1 = if i == n { b } else { a + h * i as f64 };
        let f1 = f(x1);
        if f0 == 0.0 {
            out.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            if let Some(r) = bisect(&mut f, x0, x1, xtol) {
                out.push(r);
            }
        }
        x0 = x1;
        f0 = f1;
    }
    if f0 == 0.0 {
        out.push(x0);
    }
    out
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
/// Returns `(argmax, max)`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
