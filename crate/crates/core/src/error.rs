use thiserror::Error;

use crate::quadrature::NodeFamily;

#[derive(Debug, Error)]
pub enum SdcError {
    #[error("unsupported node configuration: {family:?} with {nodes} nodes")]
    UnsupportedNodes { family: NodeFamily, nodes: usize },

    #[error("node computation for {family:?} with {nodes} nodes did not converge")]
    NodeConvergence { family: NodeFamily, nodes: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("velocity solve at node {node} did not converge (residual {residual:e})")]
    NodeSolve { node: usize, residual: f64 },

    #[error("iteration diverged after {iteration} iterations (norm {norm:e})")]
    Divergence { iteration: usize, norm: f64 },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("analysis failed at dt_kappa = {dt_kappa}, dt_mu = {dt_mu}: {reason}")]
    Analysis {
        dt_kappa: f64,
        dt_mu: f64,
        reason: String,
    },

    #[error("problem has no exact solution oracle")]
    NoExactSolution,

    #[error("problem is not linear; this operation needs constant force matrices")]
    NotLinear,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SdcError>;
