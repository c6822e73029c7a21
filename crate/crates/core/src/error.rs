use thiserror::Error;

pub type Result<T, E = QmdError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QmdError {
    #[error("invalid geometry: dimension {dim}, level {level} ({reason})")]
    InvalidGeometry { dim: usize, level: u32, reason: &'static str },

    #[error("cube at level {level} has no children at grid level {max}")]
    LevelOverflow { level: u32, max: u32 },

    #[error("point {point} is outside region {region}")]
    PointOutsideRegion { point: String, region: String },

    #[error("resolution too coarse: level {level} < k + 2 = {needed}")]
    ResolutionTooCoarse { level: u32, needed: u32 },

    #[error("invalid set specification: {0}")]
    InvalidSpec(String),

    #[error("ball contains no grid point")]
    EmptyBall,

    #[error("set is empty")]
    EmptySet,

    #[error("region contains no point of the set")]
    EmptyRegion,

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("cube {cube} fits no collection: cell {witness} lies in {count} bad 7Q regions (limit {limit})")]
    AssignmentFailure { cube: String, witness: usize, count: u64, limit: String },

    #[error("oracle cap exceeded: {0}")]
    CapExceeded(String),

    #[error("malformed set file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
