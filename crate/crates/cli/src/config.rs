//! Run configuration: JSON in, fully-defaulted JSON echoed into the manifest.

use serde::{Deserialize, Serialize};
use wrk_core::kinetics::{ConvolutionMethod, SolveMethod};
use wrk_core::potential::{PairPotential, PotentialDescriptor};
use wrk_core::Dim;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    SolveKinetic,
    Equilibria,
    PhasePortrait,
    BifurcationScan,
    LpConverge,
    VerifyIdentities,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::SolveKinetic => "solve-kinetic",
            Command::Equilibria => "equilibria",
            Command::PhasePortrait => "phase-portrait",
            Command::BifurcationScan => "bifurcation-scan",
            Command::LpConverge => "lp-converge",
            Command::VerifyIdentities => "verify-identities",
        }
    }
}

fn default_potential() -> PotentialDescriptor {
    PotentialDescriptor {
        kind: wrk_core::potential::PotentialKind::TopHat,
        params: serde_json::json!({"height": 1.0, "radius": 0.5}),
        cutoff: None,
        dim: Dim::One,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub z: f64,
    #[serde(default = "default_potential")]
    pub potential: PotentialDescriptor,
    /// Overrides `∫φ` where only the mass enters (equilibria, homogeneous runs).
    #[serde(default)]
    pub beta: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { m: 1.0, z: 1.0, potential: default_potential(), beta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    pub side: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 256, side: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    pub t_end: f64,
    pub dt: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { t_end: 1.0, dt: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub seed: u64,
    pub replicas: usize,
    pub eps: Vec<f64>,
    pub snapshot_dt: f64,
    /// Macroscopic box side; the simulated box is `box_side/ε`.
    pub box_side: f64,
    pub rho0_plus: f64,
    pub rho0_minus: f64,
    pub bins: usize,
    pub threads: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            seed: 0,
            replicas: 200,
            eps: vec![1.0, 0.5, 0.25],
            snapshot_dt: 0.1,
            box_side: 10.0,
            rho0_plus: 1.0,
            rho0_minus: 1.0,
            bins: 10,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Perturbation {
    pub amplitude: f64,
    pub mode: u32,
}

impl Default for Perturbation {
    fn default() -> Self {
        Perturbation { amplitude: 0.0, mode: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticConfig {
    pub method: SolveMethod,
    pub convolution: ConvolutionMethod,
    pub tol: f64,
    pub max_iter: usize,
    pub store_every: usize,
    pub rho0_plus: f64,
    pub rho0_minus: f64,
    /// `ρ₀±(x) = ρ₀± (1 ± amplitude·cos(2π·mode·x₁/L))`.
    pub perturbation: Perturbation,
}

impl Default for KineticConfig {
    fn default() -> Self {
        KineticConfig {
            method: SolveMethod::Picard,
            convolution: ConvolutionMethod::Fft,
            tol: 1e-12,
            max_iter: 200,
            store_every: 100,
            rho0_plus: 1.0,
            rho0_minus: 0.5,
            perturbation: Perturbation::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriaConfig {
    /// `a = zβ/m`; when set, `z` is derived as `a·m/β`.
    pub a: Option<f64>,
    pub initial_conditions: Vec<[f64; 2]>,
    pub stride: usize,
}

impl Default for EquilibriaConfig {
    fn default() -> Self {
        EquilibriaConfig {
            a: None,
            initial_conditions: wrk_core::equilibria::default_ic_grid().into_iter().map(|(p, q)| [p, q]).collect(),
            stride: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub a_min: f64,
    pub a_max: f64,
    pub steps: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { a_min: 2.0, a_max: 3.0, steps: 101 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitiesConfig {
    pub instances: usize,
    pub max_points: usize,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        IdentitiesConfig { instances: 1000, max_points: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub kinetic: KineticConfig,
    #[serde(default)]
    pub equilibria: EquilibriaConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default)]
    pub identities: IdentitiesConfig,
    #[serde(default)]
    pub output: Option<String>,
}

fn schema(path: &str, msg: impl Into<String>) -> CliError {
    CliError::Schema { path: path.to_string(), message: msg.into() }
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(schema(path, format!("must be finite and > 0, got {v}")))
    }
}

fn nonnegative(path: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(schema(path, format!("must be finite and >= 0, got {v}")))
    }
}

impl RunConfig {
    /// Parses JSON, reporting the JSON path of the first offending field.
    pub fn from_json_str(s: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(s);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(if path == "." { "" } else { &path }, e.inner().to_string())
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config always serializes")
    }

    pub fn potential(&self) -> Result<PairPotential, CliError> {
        self.model.potential.build().map_err(|e| schema("model.potential", e.to_string()))
    }

    /// `β`: the override if present, otherwise `∫φ`.
    pub fn beta(&self) -> Result<f64, CliError> {
        match self.model.beta {
            Some(b) => Ok(b),
            None => self.potential()?.l1_norm().map_err(|e| schema("model.potential", e.to_string())),
        }
    }

    pub fn validate(&self, cmd: Command) -> Result<(), CliError> {
        if let Some(c) = self.command {
            if c != cmd {
                return Err(schema(
                    "command",
                    format!("config is for `{}`, invoked as `{}`", c.as_str(), cmd.as_str()),
                ));
            }
        }
        positive("model.m", self.model.m)?;
        nonnegative("model.z", self.model.z)?;
        if let Some(b) = self.model.beta {
            positive("model.beta", b)?;
        }
        self.potential()?;
        match cmd {
            Command::Equilibria | Command::PhasePortrait => {
                match self.equilibria.a {
                    Some(a) => positive("equilibria.a", a)?,
                    None => {
                        positive("model.z", self.model.z)?;
                        self.beta()?;
                    }
                }
                if cmd == Command::PhasePortrait {
                    self.validate_time()?;
                    if self.equilibria.stride == 0 {
                        return Err(schema("equilibria.stride", "must be at least 1"));
                    }
                    if self.equilibria.initial_conditions.is_empty() {
                        return Err(schema("equilibria.initial_conditions", "must not be empty"));
                    }
                    for (i, ic) in self.equilibria.initial_conditions.iter().enumerate() {
                        for (k, v) in ic.iter().enumerate() {
                            nonnegative(&format!("equilibria.initial_conditions[{i}][{k}]"), *v)?;
                        }
                    }
                }
            }
            Command::BifurcationScan => {
                positive("scan.a_min", self.scan.a_min)?;
                positive("scan.a_max", self.scan.a_max)?;
                if self.scan.a_min >= self.scan.a_max {
                    return Err(schema("scan.a_max", "must exceed scan.a_min"));
                }
                if self.scan.steps < 2 {
                    return Err(schema("scan.steps", "must be at least 2"));
                }
            }
            Command::SolveKinetic => {
                self.validate_time()?;
                if self.grid.n == 0 {
                    return Err(schema("grid.n", "must be at least 1"));
                }
                positive("grid.side", self.grid.side)?;
                positive("kinetic.tol", self.kinetic.tol)?;
                if self.kinetic.max_iter == 0 {
                    return Err(schema("kinetic.max_iter", "must be at least 1"));
                }
                if self.kinetic.store_every == 0 {
                    return Err(schema("kinetic.store_every", "must be at least 1"));
                }
                nonnegative("kinetic.rho0_plus", self.kinetic.rho0_plus)?;
                nonnegative("kinetic.rho0_minus", self.kinetic.rho0_minus)?;
                let a = self.kinetic.perturbation.amplitude;
                if !(a.is_finite() && (0.0..=1.0).contains(&a)) {
                    return Err(schema("kinetic.perturbation.amplitude", "must lie in [0, 1]"));
                }
            }
            Command::Simulate | Command::LpConverge => {
                self.validate_time()?;
                let s = &self.simulation;
                positive("simulation.snapshot_dt", s.snapshot_dt)?;
                positive("simulation.box_side", s.box_side)?;
                nonnegative("simulation.rho0_plus", s.rho0_plus)?;
                nonnegative("simulation.rho0_minus", s.rho0_minus)?;
                if s.threads == 0 {
                    return Err(schema("simulation.threads", "must be at least 1"));
                }
                if s.bins == 0 {
                    return Err(schema("simulation.bins", "must be at least 1"));
                }
                if cmd == Command::LpConverge {
                    if s.replicas < 2 {
                        return Err(schema("simulation.replicas", "must be at least 2"));
                    }
                    if s.eps.is_empty() {
                        return Err(schema("simulation.eps", "must not be empty"));
                    }
                    for (i, e) in s.eps.iter().enumerate() {
                        if !(e.is_finite() && *e > 0.0 && *e <= 1.0) {
                            return Err(schema(&format!("simulation.eps[{i}]"), "must lie in (0, 1]"));
                        }
                    }
                    let ratio = s.snapshot_dt / self.time.dt;
                    if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                        return Err(schema("simulation.snapshot_dt", "must be a multiple of time.dt"));
                    }
                }
            }
            Command::VerifyIdentities => {
                if self.identities.instances == 0 {
                    return Err(schema("identities.instances", "must be at least 1"));
                }
                if self.identities.max_points > wrk_core::gf_algebra::DEFAULT_MAX_POINTS {
                    return Err(schema("identities.max_points", "exceeds the configuration size limit"));
                }
            }
        }
        Ok(())
    }

    fn validate_time(&self) -> Result<(), CliError> {
        positive("time.t_end", self.time.t_end)?;
        positive("time.dt", self.time.dt)?;
        let steps = (self.time.t_end / self.time.dt).round();
        if steps < 1.0 || (steps * self.time.dt - self.time.t_end).abs() > 1e-9 * self.time.t_end {
            return Err(schema("time.dt", "time.t_end must be a multiple of time.dt"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_all_defaults() {
        let c = RunConfig::from_json_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig { command: Some(Command::LpConverge), ..Default::default() };
        c.equilibria.a = Some(3.0);
        c.simulation.eps = vec![0.5, 0.125];
        let back = RunConfig::from_json_str(&c.to_json_pretty()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_and_paths() {
        match RunConfig::from_json_str(r#"{"model": {"m": 1.0, "zz": 2}}"#) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "model.zz"),
            other => panic!("{other:?}"),
        }
        let c = RunConfig::from_json_str(r#"{"model": {"m": -1.0}}"#).unwrap();
        match c.validate(Command::Equilibria) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "model.m"),
            other => panic!("{other:?}"),
        }
        match RunConfig::from_json_str(r#"{"simulation": {"seed": "x"}}"#) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "simulation.seed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn command_mismatch_is_rejected() {
        let c = RunConfig { command: Some(Command::Simulate), ..Default::default() };
        assert!(c.validate(Command::Equilibria).is_err());
        assert!(c.validate(Command::Simulate).is_ok());
    }
}
