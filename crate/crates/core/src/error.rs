use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Physics stage a failure originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Electric,
    Thermal,
    Mechanical,
    Contact,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Electric => "electric",
            Stage::Thermal => "thermal",
            Stage::Mechanical => "mechanical",
            Stage::Contact => "contact",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown material '{0}'")]
    UnknownMaterial(String),

    #[error("invalid material '{name}': {}", .violations.join("; "))]
    InvalidMaterial { name: String, violations: Vec<String> },

    #[error("invalid design: {}", .0.join("; "))]
    InvalidDesign(Vec<String>),

    #[error("meshing error: {0}")]
    Mesh(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("solver did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("matrix is not positive definite ({0})")]
    Indefinite(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("contact penalty iteration did not converge; force history {history:?}")]
    ContactNotConverged { history: Vec<f64> },

    #[error("sweep failed at voltage {voltage} V (h = {convection}): {source}")]
    Sweep {
        voltage: f64,
        convection: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("no feasible design within budget; closest point {closest} (constraint shortfall {shortfall:.4} um)")]
    Infeasible { closest: String, shortfall: f64 },

    #[error("invalid study input: {0}")]
    Study(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("config syntax error at line {line}, column {column}: {message}")]
    ConfigSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn in_stage(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::UnknownMaterial(_)
                | Error::InvalidMaterial { .. }
                | Error::InvalidDesign(_)
                | Error::Config(_)
                | Error::ConfigSyntax { .. }
                | Error::Study(_)
                | Error::Geometry(_)
                | Error::Mesh(_)
        )
    }
}
