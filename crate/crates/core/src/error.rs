use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph must have at least one vertex")]
    EmptyGraph,
    #[error("edge ({u}, {v}) is a self-loop")]
    SelfLoop { u: usize, v: usize },
    #[error("edge ({u}, {v}) appears more than once")]
    DuplicateEdge { u: usize, v: usize },
    #[error("edge ({u}, {v}) has an endpoint outside [0, {n})")]
    EndpointOutOfRange { u: usize, v: usize, n: usize },
    #[error("vertex {0} is isolated; the random walk is undefined there")]
    IsolatedVertex(usize),
    #[error("graph has no edges")]
    NoEdges,
    #[error("graph is not ergodic (connected: {connected}, bipartite: {bipartite})")]
    NonErgodic { connected: bool, bipartite: bool },
    #[error("symmetric eigensolver did not converge")]
    EigenNoConvergence,
    #[error("could not draw a connected non-bipartite {family} graph after {attempts} attempts")]
    RetriesExhausted { family: String, attempts: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("input symbol {symbol} outside randomizer domain [0, {domain})")]
    SymbolOutOfRange { symbol: usize, domain: usize },
    #[error("randomizer table row {row} is not a probability distribution")]
    InvalidTable { row: usize },
    #[error("dataset has {got} entries but the graph has {expected} clients")]
    DatasetSize { expected: usize, got: usize },
    #[error("client {client} outside [0, {n})")]
    ClientOutOfRange { client: usize, n: usize },

    #[error("enumeration needs {required:.3e} atoms, over the budget of {budget:.3e}; use Monte Carlo mode")]
    BudgetExceeded { required: f64, budget: f64 },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
