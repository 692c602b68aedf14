//! Pair potentials φ: bounded, symmetric, nonnegative, finite range.
//!
//! Every potential is radial, so symmetry `φ(−x) = φ(x)` holds by
//! construction. Gaussian and exponential shapes are hard-truncated at the
//! cutoff with no shift; the Gaussian cutoff defaults to 8σ.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::{Dim, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("β must be positive (potential has zero mass)")]
    ZeroMass,
    #[error("invalid potential parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid potential descriptor: {0}")]
    Descriptor(String),
}

fn check(name: &'static str, v: f64, positive: bool) -> Result<f64, PotentialError> {
    let ok = v.is_finite() && if positive { v > 0.0 } else { v >= 0.0 };
    if ok {
        Ok(v)
    } else {
        let want = if positive { "finite and > 0" } else { "finite and >= 0" };
        Err(PotentialError::InvalidParameter { name, reason: format!("{v} is not {want}") })
    }
}

/// Radial profile of a potential.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialShape {
    /// `h` on the closed ball of radius `radius`.
    TopHat { height: f64, radius: f64 },
    /// `a·exp(−r²/2σ²)`.
    TruncatedGaussian { amplitude: f64, sigma: f64 },
    /// `a·exp(−k r)`.
    TruncatedExponential { amplitude: f64, rate: f64 },
    /// Piecewise-linear profile through `values[i]` at `r_i = i·R/(len−1)`.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairPotential {
    shape: PotentialShape,
    cutoff: f64,
    dim: Dim,
}

impl PairPotential {
    pub fn top_hat(dim: Dim, height: f64, radius: f64) -> Result<Self, PotentialError> {
        check("height", height, false)?;
        check("radius", radius, true)?;
        Ok(PairPotential { shape: PotentialShape::TopHat { height, radius }, cutoff: radius, dim })
    }

    /// Gaussian with the default cutoff `8σ`.
    pub fn gaussian(dim: Dim, amplitude: f64, sigma: f64) -> Result<Self, PotentialError> {
        Self::gaussian_with_cutoff(dim, amplitude, sigma, 8.0 * sigma)
    }

    pub fn gaussian_with_cutoff(dim: Dim, amplitude: f64, sigma: f64, cutoff: f64) -> Result<Self, PotentialError> {
        check("amplitude", amplitude, false)?;
        check("sigma", sigma, true)?;
        check("cutoff", cutoff, true)?;
        Ok(PairPotential { shape: PotentialShape::TruncatedGaussian { amplitude, sigma }, cutoff, dim })
    }

    pub fn exponential(dim: Dim, amplitude: f64, rate: f64, cutoff: f64) -> Result<Self, PotentialError> {
        check("amplitude", amplitude, false)?;
        check("rate", rate, true)?;
        check("cutoff", cutoff, true)?;
        Ok(PairPotential { shape: PotentialShape::TruncatedExponential { amplitude, rate }, cutoff, dim })
    }

    pub fn tabulated(dim: Dim, values: Vec<f64>, cutoff: f64) -> Result<Self, PotentialError> {
        check("cutoff", cutoff, true)?;
        if values.len() < 2 {
            return Err(PotentialError::InvalidParameter {
                name: "values",
                reason: "need at least two radial nodes".into(),
            });
        }
        for &v in &values {
            check("values", v, false)?;
        }
        Ok(PairPotential { shape: PotentialShape::Tabulated { values }, cutoff, dim })
    }

    pub fn shape(&self) -> &PotentialShape {
        &self.shape
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Evaluates `φ` at the radius `r = |x|`.
    pub fn radial(&self, r: f64) -> f64 {
        if r > self.cutoff {
            return 0.0;
        }
        match &self.shape {
            PotentialShape::TopHat { height, radius } => {
                if r <= *radius {
                    *height
                } else {
                    0.0
                }
            }
            PotentialShape::TruncatedGaussian { amplitude, sigma } => {
                amplitude * (-(r * r) / (2.0 * sigma * sigma)).exp()
            }
            PotentialShape::TruncatedExponential { amplitude, rate } => amplitude * (-rate * r).exp(),
            PotentialShape::Tabulated { values } => {
                let h = self.cutoff / (values.len() - 1) as f64;
                let s = r / h;
                let i = (s.floor() as usize).min(values.len() - 2);
                let w = s - i as f64;
                values[i] * (1.0 - w) + values[i + 1] * w
            }
        }
    }

    pub fn evaluate(&self, x: Point) -> f64 {
        self.radial(x.norm())
    }

    /// Radius of the support actually used (top-hat radius may be below the cutoff).
    pub fn support_radius(&self) -> f64 {
        match &self.shape {
            PotentialShape::TopHat { radius, .. } => radius.min(self.cutoff),
            _ => self.cutoff,
        }
    }

    /// `β = ∫ φ(x) dx`, in closed form where one exists.
    pub fn l1_norm(&self) -> Result<f64, PotentialError> {
        let r = self.cutoff;
        let beta = match (&self.shape, self.dim) {
            (PotentialShape::TopHat { height, .. }, d) => {
                let rr = self.support_radius();
                match d {
                    Dim::One => 2.0 * rr * height,
                    Dim::Two => std::f64::consts::PI * rr * rr * height,
                }
            }
            (PotentialShape::TruncatedGaussian { amplitude, sigma }, Dim::One) => {
                amplitude
                    * sigma
                    * (2.0 * std::f64::consts::PI).sqrt()
                    * libm::erf(r / (sigma * std::f64::consts::SQRT_2))
            }
            (PotentialShape::TruncatedGaussian { amplitude, sigma }, Dim::Two) => {
                let s2 = sigma * sigma;
                -amplitude * 2.0 * std::f64::consts::PI * s2 * (-(r * r) / (2.0 * s2)).exp_m1()
            }
            (PotentialShape::TruncatedExponential { amplitude, rate }, Dim::One) => {
                -2.0 * amplitude / rate * (-rate * r).exp_m1()
            }
            (PotentialShape::TruncatedExponential { amplitude, rate }, Dim::Two) => {
                let kr = rate * r;
                2.0 * std::f64::consts::PI * amplitude / (rate * rate) * (1.0 - (-kr).exp() * (1.0 + kr))
            }
            (PotentialShape::Tabulated { values }, d) => tabulated_mass(values, r, d),
        };
        if beta > 0.0 {
            Ok(beta)
        } else {
            Err(PotentialError::ZeroMass)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.linf_norm() == 0.0
    }

    pub fn linf_norm(&self) -> f64 {
        match &self.shape {
            PotentialShape::TopHat { height, .. } => *height,
            PotentialShape::TruncatedGaussian { amplitude, .. }
            | PotentialShape::TruncatedExponential { amplitude, .. } => *amplitude,
            PotentialShape::Tabulated { values } => values.iter().copied().fold(0.0, f64::max),
        }
    }

    /// Lebowitz–Penrose rescaling `φ_ε(x) = ε^d φ(εx)`; the cutoff becomes `R/ε`.
    pub fn scale_lp(&self, eps: f64) -> Result<Self, PotentialError> {
        check("eps", eps, true)?;
        let s = self.dim.pow(eps);
        let shape = match &self.shape {
            PotentialShape::TopHat { height, radius } => {
                PotentialShape::TopHat { height: height * s, radius: radius / eps }
            }
            PotentialShape::TruncatedGaussian { amplitude, sigma } => {
                PotentialShape::TruncatedGaussian { amplitude: amplitude * s, sigma: sigma / eps }
            }
            PotentialShape::TruncatedExponential { amplitude, rate } => {
                PotentialShape::TruncatedExponential { amplitude: amplitude * s, rate: rate * eps }
            }
            PotentialShape::Tabulated { values } => {
                PotentialShape::Tabulated { values: values.iter().map(|v| v * s).collect() }
            }
        };
        Ok(PairPotential { shape, cutoff: self.cutoff / eps, dim: self.dim })
    }

    /// `ψ_ε(x) = (e^{−ε^d φ(x)} − 1)/ε^d`, which lies in `[−φ(x), 0]`.
    pub fn psi_eps(&self, eps: f64, x: Point) -> f64 {
        let s = self.dim.pow(eps);
        (-s * self.evaluate(x)).exp_m1() / s
    }

    /// Samples the `side`-periodisation of φ on an `n`-point-per-side grid.
    pub fn periodize(&self, side: f64, n: usize) -> Result<PeriodicKernel, PotentialError> {
        if n == 0 {
            return Err(PotentialError::InvalidParameter {
                name: "n",
                reason: "grid size must be a positive integer".into(),
            });
        }
        check("side", side, true)?;
        let rc = self.support_radius();
        if side <= 2.0 * rc {
            log::warn!("torus side {side} <= 2R = {}; periodic images overlap", 2.0 * rc);
        }
        let dx = side / n as f64;
        // images k with |x + kL| <= R for some x in [0, L)
        let kmax = (rc / side).ceil() as i64 + 1;
        let one_d = |x: f64| -> f64 { (-kmax..=kmax).map(|k| self.radial((x + k as f64 * side).abs())).sum() };
        let values = match self.dim {
            Dim::One => (0..n).map(|i| one_d(i as f64 * dx)).collect(),
            Dim::Two => {
                let mut v = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let (x, y) = (i as f64 * dx, j as f64 * dx);
                        let mut acc = 0.0;
                        for kx in -kmax..=kmax {
                            for ky in -kmax..=kmax {
                                let px = x + kx as f64 * side;
                                let py = y + ky as f64 * side;
                                acc += self.radial(px.hypot(py));
                            }
                        }
                        v.push(acc);
                    }
                }
                v
            }
        };
        Ok(PeriodicKernel { dim: self.dim, n, side, values })
    }

    pub fn to_descriptor(&self) -> PotentialDescriptor {
        let (kind, params) = match &self.shape {
            PotentialShape::TopHat { height, radius } => {
                (PotentialKind::TopHat, serde_json::json!({ "height": height, "radius": radius }))
            }
            PotentialShape::TruncatedGaussian { amplitude, sigma } => {
                (PotentialKind::TruncatedGaussian, serde_json::json!({ "amplitude": amplitude, "sigma": sigma }))
            }
            PotentialShape::TruncatedExponential { amplitude, rate } => {
                (PotentialKind::TruncatedExponential, serde_json::json!({ "amplitude": amplitude, "rate": rate }))
            }
            PotentialShape::Tabulated { values } => (PotentialKind::Tabulated, serde_json::json!({ "values": values })),
        };
        PotentialDescriptor { kind, params, cutoff: Some(self.cutoff), dim: self.dim }
    }
}

fn tabulated_mass(values: &[f64], cutoff: f64, dim: Dim) -> f64 {
    let h = cutoff / (values.len() - 1) as f64;
    let mut acc = 0.0;
    for (i, w) in values.windows(2).enumerate() {
        let (v0, v1) = (w[0], w[1]);
        acc += match dim {
            Dim::One => h * (v0 + v1),
            Dim::Two => {
                let r0 = i as f64 * h;
                // ∫ r·(linear interpolant) dr over one segment
                let seg = v0 * (h * r0 + 0.5 * h * h) + (v1 - v0) * (h * h / 3.0 + 0.5 * r0 * h);
                2.0 * std::f64::consts::PI * seg
            }
        };
    }
    acc
}

/// The L-periodisation of φ sampled on a uniform torus grid, row-major for d = 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicKernel {
    dim: Dim,
    n: usize,
    side: f64,
    values: Vec<f64>,
}

impl PeriodicKernel {
    pub fn from_values(dim: Dim, n: usize, side: f64, values: Vec<f64>) -> Result<Self, PotentialError> {
        check("side", side, true)?;
        let expect = n.checked_pow(dim.get() as u32).filter(|&len| len > 0);
        if expect != Some(values.len()) {
            return Err(PotentialError::InvalidParameter {
                name: "values",
                reason: format!("expected n^d entries for n = {n}, d = {dim}"),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(PotentialError::InvalidParameter {
                name: "values",
                reason: "kernel entries must be finite and nonnegative".into(),
            });
        }
        Ok(PeriodicKernel { dim, n, side, values })
    }

    pub fn zero(dim: Dim, n: usize, side: f64) -> Result<Self, PotentialError> {
        let len = n.pow(dim.get() as u32);
        Self::from_values(dim, n, side, vec![0.0; len])
    }

    /// Discrete delta of total mass `mass` at the origin cell.
    pub fn point_mass(dim: Dim, n: usize, side: f64, mass: f64) -> Result<Self, PotentialError> {
        let mut k = Self::zero(dim, n, side)?;
        k.values[0] = mass / k.cell_volume();
        Ok(k)
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dim.pow(self.spacing())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Discrete mass `Σ K_i Δx^d`, the quadrature approximation of `β`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    TopHat,
    TruncatedGaussian,
    TruncatedExponential,
    Tabulated,
}

/// JSON form `{"kind": "...", "params": {...}, "cutoff": R, "dim": d}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialDescriptor {
    pub kind: PotentialKind,
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    pub dim: Dim,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopHatParams {
    height: f64,
    radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianParams {
    amplitude: f64,
    sigma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExponentialParams {
    amplitude: f64,
    rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedParams {
    values: Vec<f64>,
}

fn params<T: for<'de> Deserialize<'de>>(v: &Value) -> Result<T, PotentialError> {
    T::deserialize(v).map_err(|e| PotentialError::Descriptor(format!("params: {e}")))
}

fn need_cutoff(c: Option<f64>, kind: &str) -> Result<f64, PotentialError> {
    c.ok_or_else(|| PotentialError::Descriptor(format!("{kind} potential requires a cutoff")))
}

impl PotentialDescriptor {
    pub fn from_json_str(s: &str) -> Result<Self, PotentialError> {
        serde_json::from_str(s).map_err(|e| PotentialError::Descriptor(e.to_string()))
    }

    pub fn build(&self) -> Result<PairPotential, PotentialError> {
        match self.kind {
            PotentialKind::TopHat => {
                let p: TopHatParams = params(&self.params)?;
                let mut pot = PairPotential::top_hat(self.dim, p.height, p.radius)?;
                if let Some(c) = self.cutoff {
                    pot.cutoff = check("cutoff", c, true)?;
                }
                Ok(pot)
            }
            PotentialKind::TruncatedGaussian => {
                let p: GaussianParams = params(&self.params)?;
                match self.cutoff {
                    Some(c) => PairPotential::gaussian_with_cutoff(self.dim, p.amplitude, p.sigma, c),
                    None => PairPotential::gaussian(self.dim, p.amplitude, p.sigma),
                }
            }
            PotentialKind::TruncatedExponential => {
                let p: ExponentialParams = params(&self.params)?;
                let c = need_cutoff(self.cutoff, "truncated-exponential")?;
                PairPotential::exponential(self.dim, p.amplitude, p.rate, c)
            }
            PotentialKind::Tabulated => {
                let p: TabulatedParams = params(&self.params)?;
                let c = need_cutoff(self.cutoff, "tabulated")?;
                PairPotential::tabulated(self.dim, p.values, c)
            }
        }
    }
}
