//! The kinetic system
//!
//! ```text
//! ∂ρ⁺/∂t = −mρ⁺ + z·exp(−(ρ⁻ ∗ φ))
//! ∂ρ⁻/∂t = −mρ⁻ + z·exp(−(ρ⁺ ∗ φ))
//! ```
//!
//! on a periodic grid. The primary solver is the Picard iteration of the
//! mild (integrating-factor) form, restarted on subintervals of length
//! `τ ≤ 0.5/(zβ)` so that each map is a contraction with factor `zβτ ≤ 1/2`.
//! The time integral interpolates the birth term linearly between grid times
//! and integrates the factor `e^{−m(t−s)}` exactly, which keeps every iterate
//! inside `[0, max(c₀, z/m)]` without clamping.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Dim, Point};
use crate::gf_algebra::{Quadrature, TestFunctionPair};
use crate::potential::{PeriodicKernel, PotentialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("initial density must be finite and nonnegative")]
    NegativeInitial,
    #[error("invalid kinetic run: {0}")]
    InvalidRun(String),
    #[error("Picard iteration did not converge after {iterations} sweeps (change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },
    #[error("step too large: {0}")]
    StepTooLarge(String),
    #[error("time {0} is not on the trajectory grid")]
    TimeNotOnGrid(f64),
    #[error("horizon requires 0 < α < α₀ (got α = {alpha}, α₀ = {alpha0})")]
    HorizonDomain { alpha: f64, alpha0: f64 },
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Uniform periodic grid with `n` points per side on `[0, side)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    pub dim: Dim,
    pub n: usize,
    pub side: f64,
}

impl TorusGrid {
    pub fn new(dim: Dim, n: usize, side: f64) -> Result<Self, KineticError> {
        if n == 0 || !(side.is_finite() && side > 0.0) {
            return Err(KineticError::InvalidRun(format!("bad torus grid n = {n}, side = {side}")));
        }
        Ok(TorusGrid { dim, n, side })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim.get() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dim.pow(self.spacing())
    }

    pub fn node(&self, idx: usize) -> Point {
        let h = self.spacing();
        match self.dim {
            Dim::One => Point::new1(idx as f64 * h),
            Dim::Two => Point::new2((idx / self.n) as f64 * h, (idx % self.n) as f64 * h),
        }
    }

    fn check_kernel(&self, k: &PeriodicKernel) -> Result<(), KineticError> {
        let same_side = (k.side() - self.side).abs() <= 1e-12 * self.side;
        if k.dim() != self.dim || k.n() != self.n || !same_side {
            return Err(KineticError::ShapeMismatch(format!(
                "kernel (d = {}, n = {}, L = {}) vs grid (d = {}, n = {}, L = {})",
                k.dim(),
                k.n(),
                k.side(),
                self.dim,
                self.n,
                self.side
            )));
        }
        Ok(())
    }

    /// Quadrature grid with the same nodes, for exponential-ansatz test functions.
    pub fn quad_grid(&self) -> crate::gf_algebra::QuadGrid {
        crate::gf_algebra::QuadGrid {
            dim: self.dim,
            n: self.n,
            origin: 0.0,
            extent: self.side,
            rule: Quadrature::Periodic,
        }
    }
}

/// The pair `(ρ⁺, ρ⁻)` of nonnegative grid functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField2 {
    grid: TorusGrid,
    plus: Vec<f64>,
    minus: Vec<f64>,
}

impl DensityField2 {
    pub fn new(grid: TorusGrid, plus: Vec<f64>, minus: Vec<f64>) -> Result<Self, KineticError> {
        if plus.len() != grid.len() || minus.len() != grid.len() {
            return Err(KineticError::ShapeMismatch("density length does not match grid".into()));
        }
        if plus.iter().chain(&minus).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(KineticError::NegativeInitial);
        }
        Ok(DensityField2 { grid, plus, minus })
    }

    pub fn constant(grid: TorusGrid, plus: f64, minus: f64) -> Result<Self, KineticError> {
        Self::new(grid, vec![plus; grid.len()], vec![minus; grid.len()])
    }

    pub fn from_fns<F, G>(grid: TorusGrid, f_plus: F, f_minus: G) -> Result<Self, KineticError>
    where
        F: Fn(Point) -> f64,
        G: Fn(Point) -> f64,
    {
        let plus = (0..grid.len()).map(|i| f_plus(grid.node(i))).collect();
        let minus = (0..grid.len()).map(|i| f_minus(grid.node(i))).collect();
        Self::new(grid, plus, minus)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn plus(&self) -> &[f64] {
        &self.plus
    }

    pub fn minus(&self) -> &[f64] {
        &self.minus
    }

    /// Exchanges the two species.
    pub fn swapped(&self) -> Self {
        DensityField2 { grid: self.grid, plus: self.minus.clone(), minus: self.plus.clone() }
    }

    pub fn max_value(&self) -> f64 {
        self.plus.iter().chain(&self.minus).copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.plus.iter().chain(&self.minus).copied().fold(f64::INFINITY, f64::min)
    }

    /// `max(‖ρ⁺‖∞, ‖ρ⁻‖∞)`.
    pub fn sup_norm(&self) -> f64 {
        self.plus.iter().chain(&self.minus).fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Sup-norm distance, maximised over both species.
    pub fn sup_distance(&self, other: &DensityField2) -> f64 {
        sup_diff(&self.plus, &other.plus).max(sup_diff(&self.minus, &other.minus))
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ConvolutionMethod {
    /// Circular sum ordered by kernel offset; bitwise translation-equivariant.
    Direct,
    #[default]
    Fft,
}

struct FftState {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    spectrum: Vec<Complex64>,
    buf: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

/// Applies `ρ ↦ ρ ∗ φ` on the torus, `(ρ∗φ)_i = Δx^d Σ_j K_{i−j} ρ_j`.
pub struct Convolver {
    kernel: PeriodicKernel,
    method: ConvolutionMethod,
    fft: Option<FftState>,
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}

impl FftState {
    fn new(kernel: &PeriodicKernel) -> Self {
        let n = kernel.n();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = kernel.values().len();
        let mut st = FftState {
            fwd,
            inv,
            spectrum: kernel.values().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            buf: vec![Complex64::new(0.0, 0.0); len],
            tmp: vec![Complex64::new(0.0, 0.0); len],
        };
        let mut spec = std::mem::take(&mut st.spectrum);
        st.forward(&mut spec, kernel.dim(), n);
        st.spectrum = spec;
        st
    }

    // For d = 2 the spectrum is kept in transposed layout; `inverse` undoes it.
    fn forward(&mut self, data: &mut [Complex64], dim: Dim, n: usize) {
        self.fwd.process(data);
        if dim == Dim::Two {
            transpose(data, &mut self.tmp, n);
            self.fwd.process(&mut self.tmp);
            data.copy_from_slice(&self.tmp);
        }
    }

    fn inverse(&mut self, data: &mut [Complex64], dim: Dim, n: usize) {
        self.inv.process(data);
        if dim == Dim::Two {
            transpose(data, &mut self.tmp, n);
            self.inv.process(&mut self.tmp);
            data.copy_from_slice(&self.tmp);
        }
    }
}

impl Convolver {
    pub fn new(kernel: PeriodicKernel, method: ConvolutionMethod) -> Self {
        let fft = (method == ConvolutionMethod::Fft).then(|| FftState::new(&kernel));
        Convolver { kernel, method, fft }
    }

    pub fn kernel(&self) -> &PeriodicKernel {
        &self.kernel
    }

    pub fn apply(&mut self, rho: &[f64], out: &mut [f64]) -> Result<(), KineticError> {
        let len = self.kernel.values().len();
        if rho.len() != len || out.len() != len {
            return Err(KineticError::ShapeMismatch(format!(
                "field of length {} vs kernel of length {len}",
                rho.len()
            )));
        }
        let dv = self.kernel.cell_volume();
        let n = self.kernel.n();
        let dim = self.kernel.dim();
        match self.method {
            ConvolutionMethod::Direct => direct_into(self.kernel.values(), rho, out, n, dim, dv),
            ConvolutionMethod::Fft => {
                let st = self.fft.as_mut().expect("fft state");
                let mut buf = std::mem::take(&mut st.buf);
                for (b, &r) in buf.iter_mut().zip(rho) {
                    *b = Complex64::new(r, 0.0);
                }
                st.forward(&mut buf, dim, n);
                for (b, s) in buf.iter_mut().zip(&st.spectrum) {
                    *b *= s;
                }
                st.inverse(&mut buf, dim, n);
                let scale = dv / len as f64;
                for (o, b) in out.iter_mut().zip(&buf) {
                    *o = b.re * scale;
                }
                st.buf = buf;
            }
        }
        Ok(())
    }

    pub fn convolve(&mut self, rho: &[f64]) -> Result<Vec<f64>, KineticError> {
        let mut out = vec![0.0; rho.len()];
        self.apply(rho, &mut out)?;
        Ok(out)
    }
}

fn direct_into(k: &[f64], rho: &[f64], out: &mut [f64], n: usize, dim: Dim, dv: f64) {
    match dim {
        Dim::One => {
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (off, kv) in k.iter().enumerate() {
                    acc += kv * rho[(i + n - off) % n];
                }
                *o = acc * dv;
            }
        }
        Dim::Two => {
            for i1 in 0..n {
                for i2 in 0..n {
                    let mut acc = 0.0;
                    for k1 in 0..n {
                        let r1 = (i1 + n - k1) % n;
                        for k2 in 0..n {
                            acc += k[k1 * n + k2] * rho[r1 * n + (i2 + n - k2) % n];
                        }
                    }
                    out[i1 * n + i2] = acc * dv;
                }
            }
        }
    }
}

pub fn convolve_direct(rho: &[f64], kernel: &PeriodicKernel) -> Result<Vec<f64>, KineticError> {
    Convolver::new(kernel.clone(), ConvolutionMethod::Direct).convolve(rho)
}

pub fn convolve_fft(rho: &[f64], kernel: &PeriodicKernel) -> Result<Vec<f64>, KineticError> {
    Convolver::new(kernel.clone(), ConvolutionMethod::Fft).convolve(rho)
}

/// Time derivative of the kinetic system.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivative {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl Derivative {
    pub fn sup_norm(&self) -> f64 {
        self.plus.iter().chain(&self.minus).fold(0.0, |a, v| a.max(v.abs()))
    }
}

pub fn rhs(rho: &DensityField2, m: f64, z: f64, conv: &mut Convolver) -> Result<Derivative, KineticError> {
    rho.grid.check_kernel(conv.kernel())?;
    let cm = conv.convolve(&rho.minus)?;
    let cp = conv.convolve(&rho.plus)?;
    let plus = rho.plus.iter().zip(&cm).map(|(r, u)| -m * r + z * (-u).exp()).collect();
    let minus = rho.minus.iter().zip(&cp).map(|(r, u)| -m * r + z * (-u).exp()).collect();
    Ok(Derivative { plus, minus })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    #[default]
    Picard,
    Rk4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticRun {
    pub m: f64,
    pub z: f64,
    pub kernel: PeriodicKernel,
    pub t_end: f64,
    pub dt: f64,
    pub method: SolveMethod,
    /// Sup-norm change between sweeps at which Picard stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep every `store_every`-th time step (the final time is always kept).
    pub store_every: usize,
    pub convolution: ConvolutionMethod,
}

impl KineticRun {
    pub fn new(m: f64, z: f64, kernel: PeriodicKernel, t_end: f64, dt: f64) -> Self {
        KineticRun {
            m,
            z,
            kernel,
            t_end,
            dt,
            method: SolveMethod::Picard,
            tol: 1e-12,
            max_iter: 200,
            store_every: 1,
            convolution: ConvolutionMethod::Fft,
        }
    }

    fn steps(&self) -> Result<usize, KineticError> {
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(KineticError::InvalidRun("m must be positive".into()));
        }
        if !(self.z.is_finite() && self.z >= 0.0) {
            return Err(KineticError::InvalidRun("z must be nonnegative".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(KineticError::InvalidRun("dt and t_end must be positive".into()));
        }
        if self.store_every == 0 {
            return Err(KineticError::InvalidRun("store_every must be at least 1".into()));
        }
        let steps = (self.t_end / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(KineticError::InvalidRun(format!(
                "t_end = {} is not a multiple of dt = {}",
                self.t_end, self.dt
            )));
        }
        Ok(steps as usize)
    }

    /// `c = max(c₀, z/m)`, the a-priori bound for initial data bounded by `c₀`.
    pub fn bound(&self, c0: f64) -> f64 {
        c0.max(self.z / self.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubintervalReport {
    pub t_start: f64,
    pub steps: usize,
    pub sweeps: usize,
    pub final_change: f64,
    /// Ratios of successive sweep changes, recorded while the changes are
    /// well above rounding level.
    pub contraction_factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    pub tau: f64,
    /// `z·β·τ` with the discrete kernel mass β.
    pub contraction_bound: f64,
    pub subintervals: Vec<SubintervalReport>,
}

impl PicardReport {
    pub fn max_observed_contraction(&self) -> f64 {
        self.subintervals.iter().flat_map(|s| s.contraction_factors.iter().copied()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityField2>,
    pub picard: Option<PicardReport>,
}

impl Trajectory {
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    pub fn last(&self) -> &DensityField2 {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn summary(&self) -> Vec<TimeSummary> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| TimeSummary { t, sup_norm: s.sup_norm(), min: s.min_value(), max: s.max_value() })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSummary {
    pub t: f64,
    pub sup_norm: f64,
    pub min: f64,
    pub max: f64,
}

pub fn solve(rho0: &DensityField2, run: &KineticRun) -> Result<Trajectory, KineticError> {
    match run.method {
        SolveMethod::Picard => picard_solve(rho0, run),
        SolveMethod::Rk4 => rk4_solve(rho0, run),
    }
}

/// Weights `(a, b)` of `∫₀^h e^{−m(h−s)} [g₀(1 − s/h) + g₁ s/h] ds = a·g₀ + b·g₁`.
fn exp_trapezoid_weights(m: f64, h: f64) -> (f64, f64) {
    let mu = m * h;
    let e = (-mu).exp();
    let one_minus_e = -(-mu).exp_m1();
    let a = (one_minus_e - mu * e) / (mu * m);
    let b = one_minus_e / m - a;
    (a, b)
}

struct Recorder {
    store_every: usize,
    total: usize,
    times: Vec<f64>,
    states: Vec<DensityField2>,
}

impl Recorder {
    fn offer(&mut self, k: usize, dt: f64, f: impl FnOnce() -> DensityField2) {
        if k.is_multiple_of(self.store_every) || k == self.total {
            self.times.push(k as f64 * dt);
            self.states.push(f());
        }
    }
}

pub fn picard_solve(rho0: &DensityField2, run: &KineticRun) -> Result<Trajectory, KineticError> {
    let n_steps = run.steps()?;
    let grid = rho0.grid;
    grid.check_kernel(&run.kernel)?;
    let len = grid.len();
    let beta = run.kernel.mass();
    let zb = run.z * beta;
    let per_interval = if zb > 0.0 {
        let k = (0.5 / (zb * run.dt)).floor();
        if k < 1.0 {
            return Err(KineticError::StepTooLarge(format!(
                "dt = {} exceeds the contraction subinterval 0.5/(zβ) = {}",
                run.dt,
                0.5 / zb
            )));
        }
        (k as usize).min(n_steps)
    } else {
        n_steps
    };
    let tau = per_interval as f64 * run.dt;
    let decay = (-run.m * run.dt).exp();
    let (wa, wb) = exp_trapezoid_weights(run.m, run.dt);
    let mut conv = Convolver::new(run.kernel.clone(), run.convolution);

    let mut rec = Recorder { store_every: run.store_every, total: n_steps, times: vec![], states: vec![] };
    rec.offer(0, run.dt, || rho0.clone());
    let mut report = PicardReport { tau, contraction_bound: zb * tau, subintervals: vec![] };

    let mut start_p = rho0.plus.clone();
    let mut start_m = rho0.minus.clone();
    let mut done = 0usize;
    let mut cbuf = vec![0.0; len];
    let mut g_prev_p = vec![0.0; len];
    let mut g_prev_m = vec![0.0; len];
    let mut g_next_p = vec![0.0; len];
    let mut g_next_m = vec![0.0; len];
    let mut g0_p = vec![0.0; len];
    let mut g0_m = vec![0.0; len];

    let birth = |conv: &mut Convolver, src: &[f64], cbuf: &mut [f64], dst: &mut [f64]| -> Result<(), KineticError> {
        conv.apply(src, cbuf)?;
        for (d, &u) in dst.iter_mut().zip(cbuf.iter()) {
            debug_assert!(u >= -1e-9, "negative convolution {u}");
            *d = run.z * (-u).exp();
        }
        Ok(())
    };

    while done < n_steps {
        let steps = per_interval.min(n_steps - done);
        let rows = steps + 1;
        // v: previous iterate, u: new iterate; row k is time t_start + k·dt
        let mut vp: Vec<f64> = start_p.iter().copied().cycle().take(rows * len).collect();
        let mut vm: Vec<f64> = start_m.iter().copied().cycle().take(rows * len).collect();
        let mut up = vp.clone();
        let mut um = vm.clone();
        birth(&mut conv, &start_m, &mut cbuf, &mut g0_p)?;
        birth(&mut conv, &start_p, &mut cbuf, &mut g0_m)?;

        let mut sub = SubintervalReport {
            t_start: done as f64 * run.dt,
            steps,
            sweeps: 0,
            final_change: f64::INFINITY,
            contraction_factors: vec![],
        };
        let mut prev_change = f64::INFINITY;
        loop {
            sub.sweeps += 1;
            g_prev_p.copy_from_slice(&g0_p);
            g_prev_m.copy_from_slice(&g0_m);
            let mut change: f64 = 0.0;
            for k in 0..steps {
                let next = (k + 1) * len..(k + 2) * len;
                birth(&mut conv, &vm[next.clone()], &mut cbuf, &mut g_next_p)?;
                birth(&mut conv, &vp[next.clone()], &mut cbuf, &mut g_next_m)?;
                let (head_p, tail_p) = up.split_at_mut((k + 1) * len);
                let (head_m, tail_m) = um.split_at_mut((k + 1) * len);
                let cur_p = &head_p[k * len..];
                let cur_m = &head_m[k * len..];
                let mut dp: f64 = 0.0;
                let mut dm: f64 = 0.0;
                for i in 0..len {
                    let np = decay * cur_p[i] + wa * g_prev_p[i] + wb * g_next_p[i];
                    let nm = decay * cur_m[i] + wa * g_prev_m[i] + wb * g_next_m[i];
                    dp = dp.max((np - vp[next.start + i]).abs());
                    dm = dm.max((nm - vm[next.start + i]).abs());
                    tail_p[i] = np;
                    tail_m[i] = nm;
                }
                change = change.max(dp + dm);
                std::mem::swap(&mut g_prev_p, &mut g_next_p);
                std::mem::swap(&mut g_prev_m, &mut g_next_m);
            }
            std::mem::swap(&mut up, &mut vp);
            std::mem::swap(&mut um, &mut vm);
            if prev_change.is_finite() && prev_change > 1e-9 {
                sub.contraction_factors.push(change / prev_change);
            }
            sub.final_change = change;
            if change <= run.tol {
                break;
            }
            if sub.sweeps >= run.max_iter {
                return Err(KineticError::NonConvergence { iterations: sub.sweeps, change });
            }
            prev_change = change;
        }
        for k in 1..=steps {
            let row = k * len..(k + 1) * len;
            rec.offer(done + k, run.dt, || DensityField2 {
                grid,
                plus: vp[row.clone()].to_vec(),
                minus: vm[row.clone()].to_vec(),
            });
        }
        start_p.copy_from_slice(&vp[steps * len..]);
        start_m.copy_from_slice(&vm[steps * len..]);
        report.subintervals.push(sub);
        done += steps;
    }
    Ok(Trajectory { times: rec.times, states: rec.states, picard: Some(report) })
}

/// Classical RK4, used as an independent cross-check of [`picard_solve`].
pub fn rk4_solve(rho0: &DensityField2, run: &KineticRun) -> Result<Trajectory, KineticError> {
    let n_steps = run.steps()?;
    rho0.grid.check_kernel(&run.kernel)?;
    let mut conv = Convolver::new(run.kernel.clone(), run.convolution);
    let c = run.bound(rho0.max_value().max(0.0));
    let slack = 1e-9 * c.max(1.0);
    let h = run.dt;
    let mut rec = Recorder { store_every: run.store_every, total: n_steps, times: vec![], states: vec![] };
    rec.offer(0, h, || rho0.clone());
    let mut y = rho0.clone();
    let axpy = |base: &DensityField2, k: &Derivative, s: f64| DensityField2 {
        grid: base.grid,
        plus: base.plus.iter().zip(&k.plus).map(|(a, b)| a + s * b).collect(),
        minus: base.minus.iter().zip(&k.minus).map(|(a, b)| a + s * b).collect(),
    };
    for step in 1..=n_steps {
        let k1 = rhs(&y, run.m, run.z, &mut conv)?;
        let k2 = rhs(&axpy(&y, &k1, 0.5 * h), run.m, run.z, &mut conv)?;
        let k3 = rhs(&axpy(&y, &k2, 0.5 * h), run.m, run.z, &mut conv)?;
        let k4 = rhs(&axpy(&y, &k3, h), run.m, run.z, &mut conv)?;
        let comb = |a: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
            (0..a.len()).map(|i| a[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect()
        };
        y = DensityField2 {
            grid: y.grid,
            plus: comb(&y.plus, &k1.plus, &k2.plus, &k3.plus, &k4.plus),
            minus: comb(&y.minus, &k1.minus, &k2.minus, &k3.minus, &k4.minus),
        };
        if y.min_value() < -slack || y.max_value() > c + slack {
            return Err(KineticError::StepTooLarge(format!(
                "RK4 left [0, {c}] at t = {} (min {}, max {})",
                step as f64 * h,
                y.min_value(),
                y.max_value()
            )));
        }
        rec.offer(step, h, || y.clone());
    }
    Ok(Trajectory { times: rec.times, states: rec.states, picard: None })
}

/// Scalar trajectory of the space-homogeneous system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousTrajectory {
    pub times: Vec<f64>,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl HomogeneousTrajectory {
    /// Broadcasts the constants onto `grid`, e.g. to feed [`verify_exponential_ansatz`].
    pub fn to_field_trajectory(&self, grid: TorusGrid) -> Result<Trajectory, KineticError> {
        let states = self
            .plus
            .iter()
            .zip(&self.minus)
            .map(|(&p, &m)| DensityField2::constant(grid, p, m))
            .collect::<Result<_, _>>()?;
        Ok(Trajectory { times: self.times.clone(), states, picard: None })
    }
}

/// Integrates `dρ±/dt = −mρ± + z e^{−βρ∓}` by running [`picard_solve`] on a
/// one-cell torus whose kernel has mass `β`.
pub fn homogeneous_reduce(
    rho0_plus: f64,
    rho0_minus: f64,
    m: f64,
    z: f64,
    beta: f64,
    t_end: f64,
    dt: f64,
) -> Result<HomogeneousTrajectory, KineticError> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(KineticError::InvalidRun("β must be finite and nonnegative".into()));
    }
    let grid = TorusGrid::new(Dim::One, 1, 1.0)?;
    let kernel = PeriodicKernel::point_mass(Dim::One, 1, 1.0, beta)?;
    let rho0 = DensityField2::constant(grid, rho0_plus, rho0_minus)?;
    let mut run = KineticRun::new(m, z, kernel, t_end, dt);
    run.convolution = ConvolutionMethod::Direct;
    let traj = picard_solve(&rho0, &run)?;
    Ok(HomogeneousTrajectory {
        plus: traj.states.iter().map(|s| s.plus[0]).collect(),
        minus: traj.states.iter().map(|s| s.minus[0]).collect(),
        times: traj.times,
    })
}

/// Existence horizon `T = (α₀ − α) / (2eα₀(m + zα₀e^{β/α − 1}))` for the
/// generating-functional evolution.
pub fn guaranteed_horizon(alpha: f64, alpha0: f64, m: f64, z: f64, beta: f64) -> Result<f64, KineticError> {
    if !(alpha > 0.0 && alpha < alpha0 && alpha0.is_finite()) {
        return Err(KineticError::HorizonDomain { alpha, alpha0 });
    }
    let e = std::f64::consts::E;
    let denom = 2.0 * e * alpha0 * (m + z * alpha0 * (beta / alpha - 1.0).exp());
    Ok((alpha0 - alpha) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzCheck {
    /// `B_t(θ)`.
    pub b: Complex64,
    /// Central difference of `B` in time.
    pub dbdt: Complex64,
    /// `(L̃_LP B_t)(θ)`.
    pub generator: Complex64,
    /// `|∂_t B − L̃_LP B| / |B|`.
    pub residual: f64,
}

/// Checks that `B_t(θ) = exp(⟨ρ_t⁺, θ⁺⟩ + ⟨ρ_t⁻, θ⁻⟩)` solves `∂_t B = L̃_LP B`
/// along `traj`, using `δB(θ; x, ∅) = B·ρ⁺(x)` and the shifted functional
/// `B(θ⁺, θ⁻ − φ(x−·))` evaluated by quadrature.
pub fn verify_exponential_ansatz(
    traj: &Trajectory,
    kernel: &PeriodicKernel,
    m: f64,
    z: f64,
    theta: &TestFunctionPair,
    t: f64,
    dt_fd: f64,
) -> Result<AnsatzCheck, KineticError> {
    let find = |s: f64| traj.index_of(s).ok_or(KineticError::TimeNotOnGrid(s));
    let (i0, im, ip) = (find(t)?, find(t - dt_fd)?, find(t + dt_fd)?);
    let grid = traj.states[i0].grid;
    grid.check_kernel(kernel)?;
    let q = &theta.grid;
    let same = q.dim == grid.dim
        && q.n == grid.n
        && q.rule == Quadrature::Periodic
        && (q.spacing() - grid.spacing()).abs() <= 1e-12 * grid.spacing();
    if !same {
        return Err(KineticError::ShapeMismatch("θ must live on the trajectory's torus grid".into()));
    }
    let len = grid.len();
    let w = grid.cell_volume();
    let pairing = |s: &DensityField2| -> Complex64 {
        (0..len).map(|i| (theta.plus[i] * s.plus[i] + theta.minus[i] * s.minus[i]) * w).sum()
    };
    let b_of = |s: &DensityField2| pairing(s).exp();
    let state = &traj.states[i0];
    let base = pairing(state);
    let b = base.exp();

    let n = grid.n;
    let kv = kernel.values();
    let kernel_at = |i: usize, j: usize| -> f64 {
        match grid.dim {
            Dim::One => kv[(i + n - j) % n],
            Dim::Two => {
                let (i1, i2, j1, j2) = (i / n, i % n, j / n, j % n);
                kv[((i1 + n - j1) % n) * n + (i2 + n - j2) % n]
            }
        }
    };
    let mut generator = Complex64::new(0.0, 0.0);
    for i in 0..len {
        // ⟨ρ∓, φ(x_i − ·)⟩
        let mut shift_m = 0.0;
        let mut shift_p = 0.0;
        for j in 0..len {
            let k = kernel_at(i, j);
            shift_m += state.minus[j] * k * w;
            shift_p += state.plus[j] * k * w;
        }
        let b_shift_m = (base - shift_m).exp();
        let b_shift_p = (base - shift_p).exp();
        generator -= theta.plus[i] * w * (m * b * state.plus[i] - z * b_shift_m);
        generator -= theta.minus[i] * w * (m * b * state.minus[i] - z * b_shift_p);
    }
    let h = traj.times[ip] - traj.times[im];
    let dbdt = (b_of(&traj.states[ip]) - b_of(&traj.states[im])) / h;
    Ok(AnsatzCheck { b, dbdt, generator, residual: (dbdt - generator).norm() / b.norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PairPotential;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1(n: usize, side: f64) -> TorusGrid {
        TorusGrid::new(Dim::One, n, side).unwrap()
    }

    #[test]
    fn delta_kernel_is_identity() {
        let g = grid1(16, 4.0);
        let k = PeriodicKernel::point_mass(Dim::One, 16, 4.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho: Vec<f64> = (0..16).map(|_| rng.random()).collect();
        for out in [convolve_direct(&rho, &k).unwrap(), convolve_fft(&rho, &k).unwrap()] {
            for (a, b) in out.iter().zip(&rho) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        assert_eq!(g.len(), 16);
    }

    #[test]
    fn constant_field_scales_by_discrete_mass() {
        let phi = PairPotential::gaussian(Dim::Two, 1.0, 0.4).unwrap();
        let k = phi.periodize(8.0, 32).unwrap();
        let rho = vec![0.7; 32 * 32];
        let out = convolve_fft(&rho, &k).unwrap();
        for v in out {
            assert!((v - 0.7 * k.mass()).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_and_fft_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (dim, n) in [(Dim::One, 64), (Dim::One, 45), (Dim::Two, 16), (Dim::Two, 9)] {
            let phi = PairPotential::exponential(dim, 1.3, 2.0, 1.5).unwrap();
            let k = phi.periodize(5.0, n).unwrap();
            let rho: Vec<f64> = (0..k.values().len()).map(|_| rng.random_range(0.0..2.0)).collect();
            let a = convolve_direct(&rho, &k).unwrap();
            let b = convolve_fft(&rho, &k).unwrap();
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = sup_diff(&a, &b);
            assert!(diff <= 1e-10 * scale.max(1.0), "{dim:?} n={n}: {diff}");
        }
    }

    #[test]
    fn convolution_shape_mismatch() {
        let k = PeriodicKernel::zero(Dim::One, 8, 1.0).unwrap();
        assert!(matches!(convolve_direct(&[0.0; 7], &k), Err(KineticError::ShapeMismatch(_))));
    }

    #[test]
    fn rhs_simple_cases() {
        let g = grid1(8, 4.0);
        let k = PairPotential::top_hat(Dim::One, 1.0, 0.5).unwrap().periodize(4.0, 8).unwrap();
        let mut conv = Convolver::new(k, ConvolutionMethod::Fft);
        let zero = DensityField2::constant(g, 0.0, 0.0).unwrap();
        let d = rhs(&zero, 1.0, 2.5, &mut conv).unwrap();
        assert!(d.plus.iter().chain(&d.minus).all(|v| (v - 2.5).abs() < 1e-15));
        let rho = DensityField2::from_fns(g, |x| 1.0 + x.coord(0), |_| 0.5).unwrap();
        let d = rhs(&rho, 2.0, 0.0, &mut conv).unwrap();
        for i in 0..8 {
            assert!((d.plus[i] + 2.0 * rho.plus()[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_trapezoid_weights_integrate_linears_exactly() {
        for (m, h) in [(1.0, 1e-3), (3.0, 0.1), (0.5, 2.0)] {
            let (a, b) = exp_trapezoid_weights(m, h);
            let total = -(-m * h).exp_m1() / m;
            assert!((a + b - total).abs() < 1e-15 * total.max(1e-3) * 10.0);
            assert!(a > 0.0 && b > 0.0);
            // ∫₀ʰ e^{−m(h−s)} s ds
            let lin = (m * h + (-m * h).exp_m1()) / (m * m);
            assert!((b * h - lin).abs() < 1e-11 * lin);
        }
    }

    #[test]
    fn picard_with_no_births_is_pure_decay() {
        let g = grid1(32, 2.0);
        let k = PairPotential::top_hat(Dim::One, 1.0, 0.3).unwrap().periodize(2.0, 32).unwrap();
        let rho0 = DensityField2::from_fns(g, |x| 1.0 + 0.5 * (3.0 * x.coord(0)).sin(), |_| 0.3).unwrap();
        let run = KineticRun::new(1.5, 0.0, k, 1.0, 1e-3);
        let tr = picard_solve(&rho0, &run).unwrap();
        let last = tr.last();
        let f = (-1.5f64).exp();
        for i in 0..32 {
            assert!((last.plus()[i] - f * rho0.plus()[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn dt_larger_than_subinterval_is_rejected() {
        let g = grid1(8, 2.0);
        let k = PeriodicKernel::point_mass(Dim::One, 8, 2.0, 10.0).unwrap();
        let rho0 = DensityField2::constant(g, 1.0, 1.0).unwrap();
        let run = KineticRun::new(1.0, 10.0, k, 1.0, 0.1);
        assert!(matches!(picard_solve(&rho0, &run), Err(KineticError::StepTooLarge(_))));
    }

    #[test]
    fn negative_initial_data_rejected() {
        let g = grid1(4, 1.0);
        assert_eq!(DensityField2::new(g, vec![1.0, -0.1, 0.0, 0.0], vec![0.0; 4]), Err(KineticError::NegativeInitial));
    }

    #[test]
    fn horizon_formula() {
        let t = guaranteed_horizon(0.5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let e = std::f64::consts::E;
        assert!((t - 0.5 / (2.0 * e * (1.0 + e))).abs() < 1e-15);
        let t0 = guaranteed_horizon(0.2, 1.0, 2.0, 0.0, 3.0).unwrap();
        assert!((t0 - 0.8 / (2.0 * e * 2.0)).abs() < 1e-15);
        assert!(guaranteed_horizon(1.0 - 1e-9, 1.0, 1.0, 1.0, 1.0).unwrap() < 1e-9);
        assert!(guaranteed_horizon(1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn trajectory_time_lookup() {
        let tr = homogeneous_reduce(1.0, 0.5, 1.0, 1.0, 1.0, 1.0, 0.01).unwrap();
        assert_eq!(tr.times.len(), 101);
        let ft = tr.to_field_trajectory(grid1(4, 1.0)).unwrap();
        assert_eq!(ft.index_of(0.5), Some(50));
        assert_eq!(ft.index_of(0.505), None);
    }
}
