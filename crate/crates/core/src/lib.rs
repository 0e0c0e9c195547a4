//! Two-port rigid-body and joint blocks, their assembly into a system graph,
//! the exact per-evaluation interconnection solve and fixed-step integration.

pub mod affine;
pub mod body;
pub mod drive;
mod error;
pub mod external;
pub mod integrate;
pub mod joints;
pub mod system;

pub use body::{BodyState, DynamicModel, RigidBodyParams};
pub use drive::{DriveLaw, Profile};
pub use error::{Error, Result};
pub use external::{ExternalWrench, WrenchSource};
pub use integrate::{energy_audit, integrate, EnergyLedger, IntegrationError, Scheme, Trajectory};
pub use joints::{FreeBody, LoopClosure, MotionSource, PrismaticJoint, RevoluteJoint, WeldJoint};
pub use system::{Block, BlockId, CompiledSystem, Evaluation, SystemGraph};
pub use twoport_spatial::{Mat3, Mat6, Vec3, Vec6};
