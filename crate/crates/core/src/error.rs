use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("network has no vertices")]
    EmptyNetwork,
    #[error("network is disconnected: vertex `{0}` is unreachable from `{1}`")]
    Disconnected(String, String),
    #[error("vertex `{id}` has non-positive measure {value}")]
    NonPositiveMeasure { id: String, value: f64 },
    #[error("edge ({u}, {v}) has non-positive conductance {value}")]
    NonPositiveConductance { u: String, v: String, value: f64 },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(String, String),
    #[error("self-loop at vertex `{0}`")]
    SelfLoop(String),
    #[error("duplicate vertex id `{0}`")]
    DuplicateVertex(String),
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("vertex index {0} out of range")]
    VertexOutOfRange(usize),
    #[error("vertex function has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("boundary set is empty")]
    EmptyBoundary,
    #[error("vertex sets overlap at vertex {0}")]
    OverlappingSets(usize),
    #[error("vertex set is empty")]
    EmptySet,
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("ball around vertex {0} covers the whole network; it has no complement")]
    NoComplement(usize),
    #[error("vertex {vertex} is not a member of the ball around {center}")]
    NotInBall { vertex: usize, center: usize },
    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("shrink factor must lie in (0, 1/2], got {0}")]
    BadShrinkFactor(f64),
    #[error("chain length must be at least 1")]
    ZeroChainLength,
    #[error("network has {0} vertices; dense spectral methods are capped at {1}")]
    TooLarge(usize, usize),
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("radius grid spans {0:.3} decades; at least {1} required")]
    NarrowGrid(f64, f64),
    #[error("model fit failed: {0}")]
    FitFailure(String),
    #[error("infeasible exponents: {0}")]
    InfeasibleExponents(String),
    #[error("hypotheses not met: {0}")]
    HypothesesNotMet(String),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("empty grid: {0}")]
    EmptyGrid(String),
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}
