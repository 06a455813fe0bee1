use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} has {count} neighbors, at least {required} are needed")]
    InsufficientNeighbors {
        node: usize,
        count: usize,
        required: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed triangle {index}: {reason}")]
    MalformedTriangle { index: usize, reason: String },

    #[error("virtual node for boundary node {node} falls inside the domain")]
    VirtualNodeInside { node: usize },

    #[error("boundary node {node} has {segments} incident boundary segments")]
    BoundaryTopology { node: usize, segments: usize },

    #[error("lattice spacing {spacing} leaves no interior nodes")]
    EmptyInterior { spacing: f64 },

    #[error("stencil at node {node} is rank deficient (condition estimate {condition:.3e})")]
    RankDeficientStencil { node: usize, condition: f64 },

    #[error("weight function w2 is singular at r = 0")]
    SingularWeight,

    #[error("node {node} is not in the stencil of node {center}")]
    NotInStencil { center: usize, node: usize },

    #[error("control-volume system has no retained pair equations")]
    NoPairEquations,

    #[error("least-squares solve did not converge (residual history tail {history:?})")]
    LsqNotConverged { history: Vec<f64> },

    #[error("non-positive control volumes at nodes {nodes:?}")]
    NegativeVolume { nodes: Vec<usize> },

    #[error("unphysical state: {0}")]
    Unphysical(String),

    #[error("equivalent radius {r_e:.4e} m does not exceed well radius {r_w:.4e} m")]
    WellRadius { r_e: f64, r_w: f64 },

    #[error("well at node {node} has zero total mobility and cannot meet its rate")]
    ZeroMobility { node: usize },

    #[error("all connections of node {node} were dropped")]
    IsolatedNode { node: usize },

    #[error("non-finite residual at row {row} (node {node}, {what})")]
    NonFiniteResidual {
        row: usize,
        node: usize,
        what: &'static str,
    },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("Newton failed to converge in {iterations} iterations (scaled residual {residual:.3e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("time step fell below the minimum at t = {time} d; last residual by row: {profile:?}")]
    TimestepCollapse { time: f64, profile: Vec<f64> },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unmatched candidate node at ({x}, {y})")]
    UnmatchedNode { x: f64, y: f64 },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::File {
            path: path.display().to_string(),
            source,
        }
    }

    /// Short stable tag used in the first line of CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InsufficientNeighbors { .. } => "insufficient-neighbors",
            Error::InvalidInput(_) => "invalid-input",
            Error::MalformedTriangle { .. } => "malformed-triangle",
            Error::VirtualNodeInside { .. } => "virtual-node-inside",
            Error::BoundaryTopology { .. } => "boundary-topology",
            Error::EmptyInterior { .. } => "empty-interior",
            Error::RankDeficientStencil { .. } => "rank-deficient-stencil",
            Error::SingularWeight => "singular-weight",
            Error::NotInStencil { .. } => "not-in-stencil",
            Error::NoPairEquations => "no-pair-equations",
            Error::LsqNotConverged { .. } => "lsq-not-converged",
            Error::NegativeVolume { .. } => "negative-volume",
            Error::Unphysical(_) => "unphysical",
            Error::WellRadius { .. } => "well-radius",
            Error::ZeroMobility { .. } => "zero-mobility",
            Error::IsolatedNode { .. } => "isolated-node",
            Error::NonFiniteResidual { .. } => "non-finite-residual",
            Error::SingularSystem(_) => "singular-system",
            Error::NewtonDiverged { .. } => "newton-diverged",
            Error::TimestepCollapse { .. } => "timestep-collapse",
            Error::Parse { .. } => "parse",
            Error::UnmatchedNode { .. } => "unmatched-node",
            Error::File { .. } | Error::Io(_) => "io",
        }
    }
}
