use twoport_spatial::SpatialError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error("body `{body}`: {reason}")]
    InvalidBody { body: String, reason: String },
    #[error("body `{body}` has no point named `{point}`")]
    UnknownPoint { body: String, point: String },
    #[error("body `{body}` declares point `{point}` twice")]
    DuplicatePoint { body: String, point: String },
    #[error("dynamic model of body `{body}` is singular (massless body used as a dynamic terminal)")]
    SingularDynamicModel { body: String },
    #[error("joint `{joint}`: apparent inertia {value:e} is degenerate")]
    DegenerateJointInertia { joint: String, value: f64 },
    #[error("joint `{joint}`: {reason}")]
    InvalidJoint { joint: String, reason: String },
    #[error("block `{block}` has an unconnected parent port")]
    DanglingPort { block: String },
    #[error("no dynamic terminal: {0}")]
    NoDynamicTerminal(String),
    #[error("block `{block}` already has a parent; close loops with a loop-closure block")]
    Cycle { block: String },
    #[error("unknown block id {0}")]
    UnknownBlock(usize),
    #[error("fast system is singular near block `{block}`")]
    SingularFastSystem { block: String },
    #[error("loop closure `{closure}`: relative rotation {angle:.3} rad exceeds {limit} rad")]
    ClosureRotationTooLarge {
        closure: String,
        angle: f64,
        limit: f64,
    },
    #[error("block `{block}` cannot take a parent")]
    NotAChild { block: String },
    #[error("state vector has length {found}, expected {expected}")]
    StateLength { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
