use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is singular (determinant {0:e})")]
    Singular(f64),
    #[error("point {0} is the pole of the map")]
    PoleAt(String),
    #[error("operation undefined for an elliptic element")]
    EllipticInput,
    #[error("fixed points coincide")]
    CoincidentFixedPoints,
    #[error("the identity has no isolated fixed points")]
    IdentityInput,
    #[error("set is empty")]
    EmptySet,
    #[error("half-space contains the ball-model origin; only convex caps are supported")]
    NonConvexRegion,
    #[error("generator {0} is elliptic")]
    EllipticGenerator(String),
    #[error("ping-pong disks {0} and {1} overlap")]
    OverlappingDisks(usize, usize),
    #[error("invalid group spec: {0}")]
    InvalidGroup(String),
    #[error("Klein combination hypothesis fails")]
    KleinHypothesisFails,
    #[error("pole of the map lies inside the sampled region")]
    PoleInsideRegion,
    #[error("sets touch: Euclidean distance is zero")]
    ZeroDistance,
    #[error("no separating disks: {0}")]
    NoSeparatingDisks(String),
    #[error("pairing disks are not inside the fundamental domain")]
    DisksNotInDomain,
    #[error("element is not loxodromic")]
    NonLoxodromic,
    #[error("series failed to converge")]
    DivergentSeries,
    #[error("enumeration exceeded the node cap ({nodes} nodes)")]
    ExplosionGuard { nodes: usize },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("point cloud is degenerate")]
    DegenerateCloud,
    #[error("not enough scales: {0}")]
    InsufficientScales(String),
    #[error("value {0} out of range: {1}")]
    OutOfRange(f64, &'static str),
    #[error("edge violates r(child) <= rho r(parent): ratio {ratio} > rho {rho}")]
    GeometricBoundViolated { ratio: f64, rho: f64 },
    #[error("alpha = {0} outside the admissible range")]
    AlphaOutOfRange(f64),
    #[error("angle {0} outside (0, pi]")]
    AngleOutOfRange(f64),
    #[error("segment {index} has length {length} <= K = {k}")]
    SegmentTooShort { index: usize, length: f64, k: f64 },
    #[error("bend angle {angle} at vertex {index} is sharper than {min}")]
    AngleTooSharp { index: usize, angle: f64, min: f64 },
    #[error("chain length must be at least 2 (got {0})")]
    BadChainLength(i64),
    #[error("parameters out of range: {0}")]
    ParamsOutOfRange(String),
    #[error("tree exceeded the node cap ({0})")]
    NodeCapExceeded(usize),
    #[error("tree has fewer than two levels")]
    TrivialTree,
    #[error("tree depth {have} is less than the requested {want}")]
    TreeTooShallow { have: usize, want: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
