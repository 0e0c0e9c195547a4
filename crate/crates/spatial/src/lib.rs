//! Spatial algebra shared by the multibody engine.
//!
//! Conventions used throughout the workspace:
//!
//! * A DCM `P_{a/b}` holds the coordinates of the axes of frame `a` expressed
//!   in frame `b`, so `[v]_b = P_{a/b} [v]_a`.
//! * Twists stack `[v; ω]`, wrenches stack `[F; T]`, spatial accelerations
//!   stack `[v̇; ω̇]` where `v̇` is the derivative of `v` taken in the body frame.
//! * `τ_{XY}` moves a twist from point `Y` to point `X`; its transpose moves a
//!   wrench from `X` to `Y`. The offset argument is always the vector `XY`.
//! * Euler angles are stored by axis (`[about x, about y, about z]`) whatever
//!   the rotation sequence, so the zero attitude maps to `Γ = I` for every
//!   supported sequence.

mod euler;
mod frame;
mod motion;
mod rotation;
mod transport;

pub use euler::{dcm_to_euler, euler_to_dcm, gamma, gamma_inverse, EulerAngles, EulerSequence};
pub use frame::FrameId;
pub use motion::{MotionVector18, Pose, SpatialAccel, Twist, Wrench};
pub use rotation::{rot_exp, skew, Dcm};
pub use transport::{tau, transport_motion, KinematicTransport};

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat6 = Matrix6<f64>;

/// Distance to the chart singularity (rad) below which Euler conversions fail.
pub const SINGULARITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpatialError {
    #[error("rotation axis must be unit length (norm {norm})")]
    NonUnitAxis { norm: f64 },
    #[error("matrix is not a proper rotation (orthonormality error {orthonormality:e}, det {det})")]
    NotOrthonormal { orthonormality: f64, det: f64 },
    #[error("gimbal singularity: middle Euler angle {angle} rad is within {tolerance} rad of ±π/2")]
    GimbalSingularity { angle: f64, tolerance: f64 },
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: FrameId, found: FrameId },
    #[error("cannot normalize a zero-length direction")]
    ZeroDirection,
}

/// Stack two 3-vectors into a 6-vector.
pub fn stack(top: &Vec3, bottom: &Vec3) -> Vec6 {
    Vec6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

/// Upper and lower halves of a 6-vector.
pub fn split(v: &Vec6) -> (Vec3, Vec3) {
    (v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
}

/// Normalize a direction; zero-length input is rejected.
pub fn unit(v: &Vec3) -> Result<Vec3, SpatialError> {
    let n = v.norm();
    if !(n > 1e-12) || !n.is_finite() {
        return Err(SpatialError::ZeroDirection);
    }
    Ok(v / n)
}
