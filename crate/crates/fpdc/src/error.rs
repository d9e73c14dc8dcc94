//! Error type shared across the crate.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field length {got} does not match grid size {expected}")]
    FieldLength { expected: usize, got: usize },

    #[error("fields/operators built on different grids: {0}")]
    GridMismatch(String),

    #[error("position ({x}, {y}) outside the grid domain")]
    OutsideDomain { x: f64, y: f64 },

    #[error("non-positive density entry {value:.3e} at cell {index}; Diag(rho) not invertible")]
    NonPositiveDensity { index: usize, value: f64 },

    #[error(
        "grid is {nx}x{ny}: even dimensions break the i -> i+2 stride cycles, the \
         diffusion term is not guaranteed to lie in the advection operator's image; \
         use odd nx and ny"
    )]
    EvenGrid { nx: usize, ny: usize },

    #[error(
        "minimum-norm solve stalled: residual {achieved:.3e} above target {target:.3e} \
         after {iterations} iterations"
    )]
    ResidualNotMet {
        achieved: f64,
        target: f64,
        iterations: usize,
    },

    #[error("QP infeasible: {constraint} cannot be satisfied (worst value {worst:.3e})")]
    Infeasible { constraint: String, worst: f64 },

    #[error("state is unsafe: h = {h:.6e} < 0")]
    UnsafeState { h: f64 },

    #[error("safety region {0}")]
    InvalidRegion(String),

    #[error("Voronoi partition requires at least one robot")]
    EmptySwarm,

    #[error("optimal-control sweep diverged at sweep {sweep}: field norm {norm:.3e}")]
    OcDiverged { sweep: usize, norm: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("unknown controller `{0}`; valid names: oc, sv-obc, rv-obc, rv-obc-v")]
    UnknownController(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serialize(String),
}

impl Error {
    pub fn invalid_parameter(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub fn config(path: &str, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.to_string(),
            reason: reason.into(),
        }
    }
}
