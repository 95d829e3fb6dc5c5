use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {unreachable} is unreachable from {source_vertex} inside the restricted subgraph")]
    DisconnectedSubgraph {
        source_vertex: usize,
        unreachable: usize,
    },

    #[error("edge list is not a tree: {0}")]
    NotATree(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid instance: {0}")]
    Validation(String),

    #[error("cluster {cluster} does not induce a connected subgraph")]
    DisconnectedCluster { cluster: usize },

    #[error("the cluster multigraph is disconnected")]
    DisconnectedClusterGraph,

    #[error("root combination is infeasible: cluster {cluster} cannot be reached from the root cluster")]
    InfeasibleRoots { cluster: usize },

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("enumeration exceeds the budget of {budget} spanning trees")]
    TooLarge { budget: usize },

    #[error("baseline must be positive, got {0}")]
    InvalidBaseline(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error means the instance admits no clustered spanning tree.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::DisconnectedCluster { .. }
                | Error::DisconnectedClusterGraph
                | Error::InfeasibleRoots { .. }
                | Error::DisconnectedSubgraph { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
