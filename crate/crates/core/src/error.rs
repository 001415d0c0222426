use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("no connected topology found after {attempts} attempts")]
    ConnectivityFailure { attempts: u32 },

    #[error("malformed topology: {0}")]
    MalformedTopology(String),

    #[error("node {requester} requested round-{round} value of node {owner} before it was updated")]
    ProtocolViolation {
        requester: usize,
        owner: usize,
        round: usize,
    },

    #[error("node {0} has no finite energy budget")]
    DegenerateNode(usize),

    #[error("numerical divergence at iteration {iteration}: {detail}")]
    NumericalDivergence { iteration: usize, detail: String },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    Unbounded,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
