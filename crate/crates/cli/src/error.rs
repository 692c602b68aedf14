use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Schema { .. } => "schema",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
        }
    }

    pub fn io(path: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.to_string(), message: e.to_string() }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        });
        match self {
            CliError::Schema { path, .. } => v["error"]["path"] = json!(path),
            CliError::Io { path, .. } => v["error"]["file"] = json!(path),
            CliError::Numerical(_) => {}
        }
        v
    }
}

impl From<wrk_core::kinetics::KineticError> for CliError {
    fn from(e: wrk_core::kinetics::KineticError) -> Self {
        use wrk_core::kinetics::KineticError as K;
        match e {
            K::InvalidRun(m) => CliError::Schema { path: "time".into(), message: m },
            K::NegativeInitial => CliError::Schema { path: "kinetic".into(), message: e.to_string() },
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<wrk_core::equilibria::EquilibriumError> for CliError {
    fn from(e: wrk_core::equilibria::EquilibriumError) -> Self {
        use wrk_core::equilibria::EquilibriumError as Q;
        match e {
            Q::Domain(m) => CliError::Schema { path: "equilibria".into(), message: m },
            Q::Kinetic(k) => k.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<wrk_core::microsim::MicrosimError> for CliError {
    fn from(e: wrk_core::microsim::MicrosimError) -> Self {
        use wrk_core::microsim::MicrosimError as S;
        match e {
            S::InvalidParameter { name, reason } => {
                let section = if name == "phi" { "model".to_string() } else { format!("simulation.{name}") };
                CliError::Schema { path: section, message: reason }
            }
            S::NegativePotential | S::Potential(_) => {
                CliError::Schema { path: "model.potential".into(), message: e.to_string() }
            }
            S::Kinetic(k) => k.into(),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<wrk_core::potential::PotentialError> for CliError {
    fn from(e: wrk_core::potential::PotentialError) -> Self {
        CliError::Schema { path: "model.potential".into(), message: e.to_string() }
    }
}

impl From<wrk_core::gf_algebra::GfError> for CliError {
    fn from(e: wrk_core::gf_algebra::GfError) -> Self {
        CliError::Numerical(e.to_string())
    }
}
