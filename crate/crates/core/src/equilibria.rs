//! Stationary states of the space-homogeneous system, their stability, the
//! bifurcation at `a = e`, and phase portraits.
//!
//! With `a = zβ/m` and `x = βρ⁺`, `y = βρ⁻`, equilibria solve
//! `x = a e^{−y}`, `y = a e^{−x}`, i.e. `f(a, x) = 0` with
//! `f(a, x) = a·exp(−a e^{−x}) − x`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::{homogeneous_reduce, HomogeneousTrajectory, KineticError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("no sign change for {what} on [{lo}, {hi}] (values {f_lo:e}, {f_hi:e})")]
    Bracket { what: &'static str, lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("root bound violated: {0}")]
    BoundViolation(String),
    #[error(transparent)]
    Kinetic(#[from] KineticError),
}

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;
pub const SADDLE_NODE_THRESHOLD: f64 = 1e-9;

pub fn f_func(a: f64, x: f64) -> f64 {
    a * (-a * (-x).exp()).exp() - x
}

pub fn g_func(a: f64, x: f64) -> f64 {
    x + a * (-x).exp() - 2.0 * a.ln()
}

/// Bisects to floating-point resolution. `h(lo)` and `h(hi)` must differ in sign.
fn bisect<H: Fn(f64) -> f64>(what: &'static str, h: H, lo: f64, hi: f64) -> Result<f64, EquilibriumError> {
    let (mut lo, mut hi) = (lo, hi);
    let (f_lo, f_hi) = (h(lo), h(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(EquilibriumError::Bracket { what, lo, hi, f_lo, f_hi });
    }
    let lo_positive = f_lo > 0.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = h(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if h(lo).abs() <= h(hi).abs() { lo } else { hi })
}

/// The symmetric root: the solution of `x eˣ = a`.
pub fn symmetric_root(a: f64) -> Result<f64, EquilibriumError> {
    check_a(a)?;
    bisect("x·e^x − a", |x| x * x.exp() - a, 0.0, a)
}

fn check_a(a: f64) -> Result<(), EquilibriumError> {
    if a.is_finite() && a > 0.0 {
        Ok(())
    } else {
        Err(EquilibriumError::Domain(format!("a must be positive and finite, got {a}")))
    }
}

/// Positive roots of `f(a, ·)` in ascending order. When `|a − e| ≤ tol` the
/// degenerate root `1` is returned exactly.
pub fn find_roots(a: f64, tol: f64) -> Result<Vec<f64>, EquilibriumError> {
    check_a(a)?;
    let e = std::f64::consts::E;
    if (a - e).abs() <= tol {
        return Ok(vec![1.0]);
    }
    let f = |x: f64| f_func(a, x);
    if a < e {
        return Ok(vec![bisect("f", f, 0.0, a)?]);
    }
    let ln_a = a.ln();
    let g = |x: f64| g_func(a, x);
    let y1 = bisect("g", g, 0.0, ln_a)?;
    let mut upper = 2.0 * ln_a + a;
    while g(upper) <= 0.0 {
        upper *= 2.0;
    }
    let y2 = bisect("g", g, ln_a, upper)?;
    let x1 = bisect("f", f, 0.0, y1)?;
    let x2 = bisect("f", f, y1, y2)?;
    let x3 = bisect("f", f, y2, a)?;

    let s = symmetric_root(a)?;
    if (s - x2).abs() > 1e-9 {
        return Err(EquilibriumError::BoundViolation(format!("x₂ = {x2} but x·e^x = a gives {s}")));
    }
    let low_cap = a * (-a / e).exp();
    if !(x1 > 0.0 && x1 < low_cap) {
        return Err(EquilibriumError::BoundViolation(format!("x₁ = {x1} not in (0, {low_cap})")));
    }
    let high_floor = a * (-a * (-a / e).exp()).exp();
    if !(x3 < a && x3 > high_floor) {
        return Err(EquilibriumError::BoundViolation(format!("x₃ = {x3} not in ({high_floor}, {a})")));
    }
    Ok(vec![x1, x2, x3])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootClass {
    StableNode,
    Saddle,
    SaddleNode,
}

impl RootClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RootClass::StableNode => "stable-node",
            RootClass::Saddle => "saddle",
            RootClass::SaddleNode => "saddle-node",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryRoot {
    pub x: f64,
    pub y: f64,
    pub class: RootClass,
    pub determinant: f64,
    pub trace: f64,
    pub discriminant: f64,
}

pub fn classify(a: f64, m: f64, x: f64, y: f64) -> StationaryRoot {
    let coupling = a * a * m * m * (-x - y).exp();
    let determinant = m * m - coupling;
    let class = if determinant > SADDLE_NODE_THRESHOLD * m * m {
        RootClass::StableNode
    } else if determinant < -SADDLE_NODE_THRESHOLD * m * m {
        RootClass::Saddle
    } else {
        RootClass::SaddleNode
    };
    StationaryRoot { x, y, class, determinant, trace: -2.0 * m, discriminant: 4.0 * coupling }
}

fn classified_roots(a: f64, m: f64) -> Result<Vec<StationaryRoot>, EquilibriumError> {
    Ok(find_roots(a, DEFAULT_ROOT_TOL)?
        .into_iter()
        .map(|x| {
            let y = if x == 1.0 && (a - std::f64::consts::E).abs() <= DEFAULT_ROOT_TOL { 1.0 } else { a * (-x).exp() };
            classify(a, m, x, y)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub a: f64,
    pub m: f64,
    pub z: f64,
    pub beta: f64,
    pub roots: Vec<StationaryRoot>,
    /// `(x/β, y/β)` for each root.
    pub densities: Vec<(f64, f64)>,
}

impl EquilibriumReport {
    pub fn new(m: f64, z: f64, beta: f64) -> Result<Self, EquilibriumError> {
        if !(m.is_finite() && m > 0.0 && z.is_finite() && z > 0.0 && beta.is_finite() && beta > 0.0) {
            return Err(EquilibriumError::Domain("m, z and β must be positive".into()));
        }
        let a = z * beta / m;
        let roots = classified_roots(a, m)?;
        let densities = roots.iter().map(|r| (r.x / beta, r.y / beta)).collect();
        Ok(EquilibriumReport { a, m, z, beta, roots, densities })
    }

    pub fn labels(&self) -> Vec<String> {
        match self.roots.len() {
            1 => vec!["(x0,x0)".to_string()],
            _ => vec!["(x1,x3)".into(), "(x2,x2)".into(), "(x3,x1)".into()],
        }
    }
}

/// Homogeneous trajectory; the integration itself is [`homogeneous_reduce`].
pub fn integrate_homog(
    m: f64,
    z: f64,
    beta: f64,
    rho0_plus: f64,
    rho0_minus: f64,
    t_end: f64,
    dt: f64,
) -> Result<HomogeneousTrajectory, EquilibriumError> {
    Ok(homogeneous_reduce(rho0_plus, rho0_minus, m, z, beta, t_end, dt)?)
}

/// Time derivative of the homogeneous system at `(p, q)`.
pub fn homog_rhs(m: f64, z: f64, beta: f64, p: f64, q: f64) -> (f64, f64) {
    (-m * p + z * (-beta * q).exp(), -m * q + z * (-beta * p).exp())
}

pub fn default_ic_grid() -> Vec<(f64, f64)> {
    let vals = [0.0, 0.5, 1.0, 1.5, 2.0];
    vals.iter().flat_map(|&p| vals.iter().map(move |&q| (p, q))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitTrajectory {
    pub initial: (f64, f64),
    pub trajectory: HomogeneousTrajectory,
    pub terminal: (f64, f64),
    pub nearest: String,
    pub distance: f64,
    /// `max(|dρ⁺/dt|, |dρ⁻/dt|)` at the terminal state.
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePortrait {
    pub report: EquilibriumReport,
    pub t_end: f64,
    pub dt: f64,
    pub trajectories: Vec<PortraitTrajectory>,
}

/// Integrates one trajectory per initial condition with `z = am/β`. Stored
/// trajectories keep every `stride`-th time point plus the last.
pub fn phase_portrait(
    a: f64,
    m: f64,
    beta: f64,
    ics: &[(f64, f64)],
    t_end: f64,
    dt: f64,
    stride: usize,
) -> Result<PhasePortrait, EquilibriumError> {
    check_a(a)?;
    if stride == 0 {
        return Err(EquilibriumError::Domain("stride must be at least 1".into()));
    }
    let z = a * m / beta;
    let report = EquilibriumReport::new(m, z, beta)?;
    let labels = report.labels();
    let trajectories = ics
        .par_iter()
        .map(|&(p0, q0)| {
            let full = integrate_homog(m, z, beta, p0, q0, t_end, dt)?;
            let last = full.times.len() - 1;
            let terminal = (full.plus[last], full.minus[last]);
            let (nearest, distance) = report
                .densities
                .iter()
                .zip(&labels)
                .map(|(&(ex, ey), l)| (l.clone(), (terminal.0 - ex).hypot(terminal.1 - ey)))
                .min_by(|u, v| u.1.total_cmp(&v.1))
                .expect("at least one equilibrium");
            let (dp, dq) = homog_rhs(m, z, beta, terminal.0, terminal.1);
            let keep = |i: usize| i.is_multiple_of(stride) || i == last;
            let pick = |v: &[f64]| v.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, x)| *x).collect();
            let trajectory =
                HomogeneousTrajectory { times: pick(&full.times), plus: pick(&full.plus), minus: pick(&full.minus) };
            Ok(PortraitTrajectory {
                initial: (p0, q0),
                trajectory,
                terminal,
                nearest,
                distance,
                drift: dp.abs().max(dq.abs()),
            })
        })
        .collect::<Result<Vec<_>, EquilibriumError>>()?;
    Ok(PhasePortrait { report, t_end, dt, trajectories })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRow {
    pub a: f64,
    pub roots: Vec<StationaryRoot>,
}

/// Roots and classes on `steps` equally spaced values of `a` in `[a_min, a_max]`.
pub fn bifurcation_scan(a_min: f64, a_max: f64, steps: usize, m: f64) -> Result<Vec<BifurcationRow>, EquilibriumError> {
    if !(a_min > 0.0 && a_min < a_max && a_max.is_finite()) || steps < 2 {
        return Err(EquilibriumError::Domain(format!(
            "need 0 < a_min < a_max and steps ≥ 2 (got {a_min}, {a_max}, {steps})"
        )));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(EquilibriumError::Domain("m must be positive".into()));
    }
    let h = (a_max - a_min) / (steps - 1) as f64;
    (0..steps)
        .into_par_iter()
        .map(|i| {
            let a = if i == steps - 1 { a_max } else { a_min + i as f64 * h };
            Ok(BifurcationRow { a, roots: classified_roots(a, m)? })
        })
        .collect()
}
