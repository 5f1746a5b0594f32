use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("depth {depth} outside [{min}, {max}]")]
    DepthOutOfRange { depth: u32, min: u32, max: u32 },
    #[error("gamma {0} outside (0, 2)")]
    InvalidGamma(f64),
    #[error("rho {0} outside (-1, 1)")]
    InvalidRho(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("sample is not normalizable (total mass {0})")]
    NonNormalizable(f64),
    #[error("cell index {index} outside grid of {cells} cells")]
    IndexOutOfGrid { index: usize, cells: usize },
    #[error("ball radius {eps} is smaller than the grid spacing {spacing}")]
    EmptyBall { eps: f64, spacing: f64 },
    #[error("depth mismatch: {0} vs {1}")]
    DepthMismatch(u32, u32),
    #[error("curves are parametrized by different measures")]
    MeasureMismatch,
    #[error("weights have length {got}, expected {expected}")]
    WeightsLength { got: usize, expected: usize },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("row {row} meets the support in {count} cells")]
    AmbiguousRoot { row: usize, count: usize },
    #[error("resolution {fine} is not divisible by {n}")]
    Divisibility { fine: usize, n: usize },
    #[error("bad range [{a}, {b}] for size {n}")]
    BadRange { a: usize, b: usize, n: usize },
    #[error("boundary of [{u}, {v}] never splits into two arcs")]
    DegenerateBipartition { u: usize, v: usize },
    #[error("endpoint {0} is not in both boundary parts")]
    EndpointNotInParts(usize),
    #[error("vertex {0} lies on the boundary")]
    OnBoundary(usize),
    #[error("graph is disconnected: {0}")]
    Disconnected(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("need at least 2 common vertices, got {0}")]
    TooFewVertices(usize),
    #[error("size {n} exceeds the exhaustive limit {max}")]
    TooLarge { n: usize, max: usize },
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("config: {0}")]
    Config(String),
    #[error("stage {stage}: {detail}")]
    Invariant { stage: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
