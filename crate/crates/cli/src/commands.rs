//! Subcommand implementations. Each returns the rendered output text.

use std::f64::consts::{FRAC_PI_2, TAU};

use arnold_core::contour::contour_lines;
use arnold_core::crests::{classify_regime, crest_orientation, crest_residual, eta, tangency_points, xi};
use arnold_core::diffusion::{self, build_pseudo_orbit_general, build_pseudo_orbit_highway, diffusion_time, rising_side};
use arnold_core::highways::{highway_domain, highway_level, highway_point, trace_highway};
use arnold_core::scattering::{grad_closed_form, grad_finite_difference, reduced_poincare, symmetry_check_mu_grid};
use arnold_core::verify::{epsilon_star, measure_homoclinic_jump, melnikov_quadrature_oracle};
use arnold_core::{model, Branch, CrestType, Mechanism, Orientation, Side};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{Format, RunConfig};
use crate::output::{json as to_json, Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Single,
    A,
    B,
    C,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Single => Branch::Single,
            BranchArg::A => Branch::A,
            BranchArg::B => Branch::B,
            BranchArg::C => Branch::C,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Left,
    Right,
    Both,
}

fn side_name(s: Side) -> &'static str {
    match s {
        Side::Left => "left",
        Side::Right => "right",
    }
}

fn crest_name(c: CrestType) -> &'static str {
    match c {
        CrestType::Maximum => "M",
        CrestType::Minimum => "m",
    }
}

fn check_range(name: &str, lo: f64, hi: f64) -> Result<(), CliError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CliError::Config(format!("{name} range must satisfy min < max, got [{lo}, {hi}]")));
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

pub fn regime(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.params.require_scattering()?;
    let r = classify_regime(&cfg.params);
    match cfg.format {
        Format::Json => to_json(&r),
        Format::Csv => {
            let mut t = Table::new(&["regime", "mu", "threshold_low", "threshold_high", "I_plus", "I_plusplus", "on_boundary"]);
            let name = format!("{:?}", r.regime);
            t.push(vec![
                name.as_str().into(),
                r.mu.into(),
                r.thresholds.0.into(),
                r.thresholds.1.into(),
                r.i_plus.unwrap_or(f64::NAN).into(),
                r.i_plusplus.unwrap_or(f64::NAN).into(),
                Cell::Text(r.on_boundary.to_string()),
            ]);
            Ok(t.render())
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CrestsArgs {
    /// Action at which the crests are sampled.
    #[arg(long = "I", default_value_t = 1.2, allow_hyphen_values = true)]
    pub i: f64,
}

#[derive(Debug, Clone, Serialize)]
struct CrestSample {
    branch: &'static str,
    phi: f64,
    s: f64,
    residual: f64,
}

pub fn crests(cfg: &RunConfig, args: &CrestsArgs) -> Result<String, CliError> {
    let p = &cfg.params;
    p.require_scattering()?;
    let orientation = crest_orientation(p, args.i);
    if orientation == Orientation::Singular {
        return Err(arnold_core::Error::SingularCrest(args.i).into());
    }
    let mut samples = Vec::new();
    for crest in [CrestType::Maximum, CrestType::Minimum] {
        for j in 0..cfg.grid {
            let u = TAU * j as f64 / cfg.grid as f64;
            let (phi, s) = match orientation {
                Orientation::Horizontal => (u, xi(p, crest, args.i, u)?),
                _ => (eta(p, crest, args.i, u)?, u),
            };
            samples.push(CrestSample { branch: crest_name(crest), phi, s, residual: crest_residual(p, args.i, phi, s).abs() });
        }
    }
    match cfg.format {
        Format::Json => to_json(&json!({ "I": args.i, "orientation": orientation, "samples": samples })),
        Format::Csv => {
            let mut t = Table::new(&["branch", "phi", "s", "residual"]);
            for c in samples {
                t.push(vec![c.branch.into(), c.phi.into(), c.s.into(), c.residual.into()]);
            }
            Ok(t.render())
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PortraitArgs {
    #[arg(long = "I-min", default_value_t = -3.0, allow_hyphen_values = true)]
    pub i_min: f64,
    #[arg(long = "I-max", default_value_t = 3.0, allow_hyphen_values = true)]
    pub i_max: f64,
    #[arg(long = "theta-min", default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta_min: f64,
    #[arg(long = "theta-max", default_value_t = TAU, allow_hyphen_values = true)]
    pub theta_max: f64,
    /// Number of evenly spaced contour levels between the grid extremes.
    #[arg(long, default_value_t = 12)]
    pub levels: usize,
    /// Explicit contour levels (comma separated); overrides `--levels`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub level: Vec<f64>,
    /// Scattering-map branch whose reduced potential is sampled.
    #[arg(long, value_enum, default_value_t = BranchArg::Single)]
    pub branch: BranchArg,
}

pub fn portrait(cfg: &RunConfig, args: &PortraitArgs) -> Result<String, CliError> {
    let p = cfg.params;
    p.require_scattering()?;
    check_range("I", args.i_min, args.i_max)?;
    check_range("theta", args.theta_min, args.theta_max)?;
    let n = cfg.grid;
    let is = linspace(args.i_min, args.i_max, n);
    let thetas = linspace(args.theta_min, args.theta_max, n);
    let branch: Branch = args.branch.into();
    // values[row = I][column = θ]; holes and tangency points become NaN
    let values: Vec<Vec<f64>> = is
        .par_iter()
        .map(|&i| thetas.iter().map(|&th| reduced_poincare(&p, i, th, CrestType::Maximum, branch).unwrap_or(f64::NAN)).collect())
        .collect();
    let levels = if args.level.is_empty() {
        let finite = values.iter().flatten().copied().filter(|v| v.is_finite());
        let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if lo < hi {
            (1..=args.levels).map(|k| lo + (hi - lo) * k as f64 / (args.levels + 1) as f64).collect()
        } else {
            Vec::new()
        }
    } else {
        args.level.clone()
    };
    let mut contours = Vec::new();
    for &level in &levels {
        for line in contour_lines(&thetas, &is, &values, level) {
            // contour points come back as (θ, I)
            contours.push((level, line.into_iter().map(|(th, i)| (i, th)).collect::<Vec<_>>()));
        }
    }
    match cfg.format {
        Format::Json => {
            let cs: Vec<_> = contours.iter().map(|(lv, pts)| json!({ "level": lv, "points": pts })).collect();
            to_json(&json!({
                "I": is,
                "theta": thetas,
                "values": values,
                "highway_level": highway_level(&p),
                "contours": cs,
            }))
        }
        Format::Csv => {
            let mut t = Table::new(&["kind", "index", "I", "theta", "value"]);
            for (a, row) in values.iter().enumerate() {
                for (b, &v) in row.iter().enumerate() {
                    t.push(vec!["grid".into(), (a * n + b).into(), is[a].into(), thetas[b].into(), v.into()]);
                }
            }
            for (k, (lv, pts)) in contours.iter().enumerate() {
                for &(i, th) in pts {
                    t.push(vec!["contour".into(), k.into(), i.into(), th.into(), (*lv).into()]);
                }
            }
            Ok(t.render())
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct HighwaysArgs {
    /// Lower action (default −I*).
    #[arg(long = "I-min", allow_hyphen_values = true)]
    pub i_min: Option<f64>,
    /// Upper action (default I*).
    #[arg(long = "I-max", allow_hyphen_values = true)]
    pub i_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = SideArg::Both)]
    pub side: SideArg,
}

pub fn highways(cfg: &RunConfig, args: &HighwaysArgs) -> Result<String, CliError> {
    let p = &cfg.params;
    p.require_scattering()?;
    let lo = args.i_min.unwrap_or(-cfg.i_star.abs());
    let hi = args.i_max.unwrap_or(cfg.i_star.abs());
    check_range("I", lo, hi)?;
    let step = (hi - lo) / (cfg.grid - 1) as f64;
    let sides = match args.side {
        SideArg::Left => vec![Side::Left],
        SideArg::Right => vec![Side::Right],
        SideArg::Both => vec![Side::Left, Side::Right],
    };
    let traces: Vec<_> = sides.iter().map(|&s| (s, trace_highway(p, s, lo, hi, step))).collect();
    for (s, tr) in &traces {
        if let Some(e) = &tr.error {
            eprintln!("note: {} highway stops early: {e}", side_name(*s));
        }
    }
    match cfg.format {
        Format::Json => {
            let ts: Vec<_> = traces
                .iter()
                .map(|(s, tr)| json!({ "side": side_name(*s), "samples": tr.samples, "stopped": tr.error.as_ref().map(|e| e.to_string()) }))
                .collect();
            to_json(&json!({ "level": highway_level(p), "domain": highway_domain(p), "traces": ts }))
        }
        Format::Csv => {
            let mut t = Table::new(&["side", "I", "theta", "psi", "residual"]);
            for (s, tr) in &traces {
                for h in &tr.samples {
                    t.push(vec![side_name(*s).into(), h.i.into(), h.theta.into(), h.psi.into(), h.residual.into()]);
                }
            }
            Ok(t.render())
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TangencyArgs {
    #[arg(long = "I-min", default_value_t = 0.0, allow_hyphen_values = true)]
    pub i_min: f64,
    /// Upper action (default I*).
    #[arg(long = "I-max", allow_hyphen_values = true)]
    pub i_max: Option<f64>,
}

pub fn tangency(cfg: &RunConfig, args: &TangencyArgs) -> Result<String, CliError> {
    let p = &cfg.params;
    p.require_scattering()?;
    let hi = args.i_max.unwrap_or(cfg.i_star.abs());
    check_range("I", args.i_min, hi)?;
    let pts: Vec<_> = linspace(args.i_min, hi, cfg.grid).into_iter().filter_map(|i| tangency_points(p, i)).collect();
    match cfg.format {
        Format::Json => to_json(&pts),
        Format::Csv => {
            let mut t = Table::new(&["I", "psi1", "psi2", "theta1", "theta2"]);
            for q in pts {
                t.push(vec![q.i.into(), q.psi1.into(), q.psi2.into(), q.theta1.into(), q.theta2.into()]);
            }
            Ok(t.render())
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExponentArgs {
    /// Scattering legs have at most ⌈ε^{−c}⌉ steps.
    #[arg(long)]
    pub c: Option<f64>,
    /// Inner legs return within ε^a.
    #[arg(long)]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub exponents: ExponentArgs,
    /// Follow this highway only (from the end it leaves towards the other);
    /// by default the builder picks branches by regime.
    #[arg(long, value_enum)]
    pub side: Option<SideArg>,
}

pub fn orbit(cfg: &RunConfig, args: &OrbitArgs) -> Result<String, CliError> {
    let p = &cfg.params;
    let i_star = cfg.i_star.abs();
    let orbit = match args.side {
        None => build_pseudo_orbit_general(p, i_star, cfg.c, cfg.a)?,
        Some(SideArg::Both) => return Err(CliError::Config("orbit follows a single side".into())),
        Some(s) => {
            let side = if s == SideArg::Left { Side::Left } else { Side::Right };
            // the highway pushes I up when its side matches the sign of a10
            let up = side == rising_side(p);
            let (from, to) = if up { (-i_star, i_star) } else { (i_star, -i_star) };
            build_pseudo_orbit_highway(p, from, to, side, cfg.c, cfg.a)?
        }
    };
    match cfg.format {
        Format::Json => to_json(&orbit),
        Format::Csv => {
            let mut t = Table::new(&["leg", "mechanism", "I", "theta", "model_time"]);
            for (k, leg) in orbit.legs.iter().enumerate() {
                let mech = match leg.mechanism {
                    Mechanism::Scattering => "scattering",
                    Mechanism::Inner => "inner",
                };
                for pt in &leg.points {
                    t.push(vec![k.into(), mech.into(), pt.i.into(), pt.theta.into(), leg.model_time.into()]);
                }
            }
            Ok(t.render())
        }
    }
}

pub fn difftime(cfg: &RunConfig) -> Result<String, CliError> {
    if !(cfg.params.eps > 0.0) {
        return Err(CliError::Config("difftime needs eps > 0".into()));
    }
    let d = diffusion_time(&cfg.params, cfg.i_star, cfg.c, cfg.a)?;
    match cfg.format {
        Format::Json => to_json(&d),
        Format::Csv => {
            let mut t = Table::new(&["Ts", "Ns", "Nss", "Th", "Ti", "C", "Td", "delta", "asymptotic", "ratio", "inner_share"]);
            t.push(vec![
                d.ts.into(),
                Cell::Int(d.ns as i64),
                Cell::Int(d.nss as i64),
                d.th.into(),
                d.ti.into(),
                d.c.into(),
                d.td.into(),
                d.delta.into(),
                d.asymptotic.into(),
                d.ratio.into(),
                d.inner_share.into(),
            ]);
            Ok(t.render())
        }
    }
}

pub fn epsstar(cfg: &RunConfig) -> Result<String, CliError> {
    let e = epsilon_star(&cfg.params, cfg.i_star)?;
    match cfg.format {
        Format::Json => to_json(&e),
        Format::Csv => {
            let mut t = Table::new(&["I_star", "eps_star", "psi_at_min", "highway_min", "envelope"]);
            t.push(vec![e.i_star.into(), e.eps_star.into(), e.psi_at_min.into(), e.highway_min.unwrap_or(f64::NAN).into(), e.envelope.into()]);
            Ok(t.render())
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

/// Deterministic low-discrepancy point in the unit square.
fn unit_point(k: usize) -> (f64, f64) {
    let g1 = 0.754_877_666_246_692_7;
    let g2 = 0.569_840_290_998_053_2;
    ((0.5 + g1 * k as f64).fract(), (0.5 + g2 * k as f64).fract())
}

/// Quick oracle suite on the configured parameters.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    let p = cfg.params;
    p.require_scattering()?;
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for &i in &[-2.0, 0.0, 2.0] {
        for j in 0..3 {
            for k in 0..3 {
                let (phi, s) = (TAU * j as f64 / 3.0 + 0.3, TAU * k as f64 / 3.0 + 0.7);
                let q = melnikov_quadrature_oracle(&p, i, phi, s, 1e-12)?;
                let c = model::melnikov_potential(&p, i, phi, s);
                worst = worst.max((q - c).abs() / c.abs().max(1.0));
            }
        }
    }
    out.push(check("melnikov_quadrature", worst <= 1e-8, format!("max rel err {worst:.3e}")));

    let mut even: f64 = 0.0;
    let mut grad: f64 = 0.0;
    let mut n_grad = 0;
    for k in 0..200 {
        let (u, v) = unit_point(k);
        let (i, th) = (-3.0 + 6.0 * u, TAU * v);
        if let (Ok(a), Ok(b)) = (
            reduced_poincare(&p, i, th, CrestType::Maximum, Branch::Single),
            reduced_poincare(&p, -i, th, CrestType::Maximum, Branch::Single),
        ) {
            even = even.max((a - b).abs());
        }
        if let (Ok(g), Ok(fd)) = (
            grad_closed_form(&p, i, th, CrestType::Maximum, Branch::Single),
            grad_finite_difference(&p, i, th, CrestType::Maximum, Branch::Single, 1e-5),
        ) {
            grad = grad.max((g.d_i - fd.d_i).hypot(g.d_theta - fd.d_theta) / (1.0 + g.norm()));
            n_grad += 1;
        }
    }
    out.push(check("evenness_in_I", even <= 1e-10, format!("max discrepancy {even:.3e}")));
    out.push(check("gradient_vs_differences", n_grad > 0 && grad <= 1e-6, format!("max scaled error {grad:.3e} over {n_grad} points")));

    let sym = symmetry_check_mu_grid(&p, 10, -3.0, 3.0);
    out.push(check("mu_symmetry", sym.max_discrepancy <= 1e-10, format!("max discrepancy {:.3e} over {} points", sym.max_discrepancy, sym.compared)));

    let side = rising_side(&p);
    let anchor = match highway_point(&p, 0.0, side) {
        Ok(h) => {
            let want = if side == Side::Right { 3.0 * FRAC_PI_2 } else { FRAC_PI_2 };
            let d = (h.theta - want).abs();
            check("highway_anchor", d <= 1e-10, format!("|theta_h(0) - psi_anchor| = {d:.3e}"))
        }
        Err(e) => check("highway_anchor", false, format!("no highway at I = 0: {e}")),
    };
    out.push(anchor);

    let mut erg_ok = true;
    for k in 1..40 {
        let i = 0.137 * k as f64 + 0.05;
        let e = diffusion::inner_ergodization_time(i, 0.01, 0.25)?;
        let n = diffusion::dirichlet_bound(0.01, 0.25);
        let brute = (1..=n).find(|&m| TAU * (i * m as f64 - (i * m as f64).round()).abs() < 0.01f64.powf(0.25));
        erg_ok &= Some(e.k) == brute;
    }
    out.push(check("ergodization_vs_scan", erg_ok, "39 actions".into()));

    let m1 = measure_homoclinic_jump(&p.with_eps(1e-3), 1.0, 1.0, 0.0, 8.0)?;
    let m2 = measure_homoclinic_jump(&p.with_eps(5e-4), 1.0, 1.0, 0.0, 8.0)?;
    let ratio = m1.error / m2.error;
    out.push(check("homoclinic_jump_order", (3.0..=5.0).contains(&ratio), format!("error ratio {ratio:.3}")));

    let lower = diffusion::time_ts_lower_bound(&p, 0.0, 1.0);
    let ts = match diffusion::time_ts(&p, 0.0, 1.0, side) {
        Ok(ts) => check("ts_lower_bound", ts >= lower, format!("Ts = {ts:.6e} vs bound {lower:.6e}")),
        Err(e) => check("ts_lower_bound", true, format!("skipped: highway unavailable on [0 1] ({e})")),
    };
    out.push(ts);
    Ok(out)
}

pub fn verify(cfg: &RunConfig) -> Result<(String, usize), CliError> {
    let checks = run_checks(cfg)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    let text = match cfg.format {
        Format::Json => to_json(&checks)?,
        Format::Csv => {
            let mut t = Table::new(&["check", "status", "detail"]);
            for c in &checks {
                t.push(vec![c.name.into(), if c.pass { "PASS" } else { "FAIL" }.into(), c.detail.replace(',', ";").as_str().into()]);
            }
            t.render()
        }
    };
    Ok((text, failed))
}
