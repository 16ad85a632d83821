use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("degenerate cloud: all points coincide")]
    DegenerateCloud,
    #[error("label length {labels} does not match point count {points}")]
    LabelMismatch { labels: usize, points: usize },
    #[error("part ids are not contiguous from 0 (found {found}, expected < {parts})")]
    NonContiguousLabels { found: usize, parts: usize },
    #[error("normal is not unit length (norm {norm})")]
    NonUnitNormal { norm: f64 },
    #[error("matrix is not orthogonal (max deviation {dev})")]
    NonOrthogonal { dev: f64 },
    #[error("composition of parallel distinct planes is a translation, not a rotation")]
    TranslationResult,
    #[error("generator set holds more than 3 active planes")]
    TooManyGenerators,
    #[error("active generator planes are not pairwise distinct")]
    DuplicateGenerator,
    #[error("non-terminating group: closure exceeded max order {max_order}")]
    NonTerminatingGroup { max_order: usize },
    #[error("not a symmetry of this cloud: coverage residual {residual} exceeds {tolerance}")]
    NotASymmetry { residual: f64, tolerance: f64 },
    #[error("dihedral angle {angle_deg} deg is not within {tol_deg} deg of any snap target")]
    UnsnappableAngle { angle_deg: f64, tol_deg: f64 },
    #[error("vector database is empty")]
    EmptyDb,
    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("score undefined at this noise level: all kernel weights vanished")]
    ScoreUndefined,
    #[error("sampled generator sets failed to generate a finite group after {retries} retries")]
    SamplingFailed { retries: usize },
    #[error("point counts differ ({a} vs {b}); resample before calling")]
    UnequalSizes { a: usize, b: usize },
    #[error("{n} points exceed the exact solver cap {cap}; enable the approximate flag")]
    AboveSolverCap { n: usize, cap: usize },
    #[error("degenerate spread along axis {axis}: cannot fit a per-axis scale")]
    DegenerateSpread { axis: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
