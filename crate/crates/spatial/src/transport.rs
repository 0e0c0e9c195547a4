use crate::motion::{MotionVector18, SpatialAccel, Twist, Wrench};
use crate::{skew, Mat6, Vec3};

/// Rigid kinematic model `τ_{XY} = [[1, (*XY)], [0, 1]]`.
///
/// `τ_{XY}` moves twists (and spatial accelerations of a rigid body) from `Y`
/// to `X`; `τ_{XY}ᵀ` moves wrenches from `X` to `Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicTransport {
    offset: Vec3,
}

/// Build `τ_{PB}` from the offset vector `PB`.
pub fn tau(offset: &Vec3) -> KinematicTransport {
    KinematicTransport { offset: *offset }
}

impl KinematicTransport {
    pub fn offset(&self) -> &Vec3 {
        &self.offset
    }

    pub fn matrix(&self) -> Mat6 {
        let mut m = Mat6::identity();
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&skew(&self.offset));
        m
    }

    /// `τ_{PB} τ_{BQ} = τ_{PQ}`.
    pub fn compose(&self, inner: &KinematicTransport) -> KinematicTransport {
        tau(&(self.offset + inner.offset))
    }

    /// `τ_{PB}⁻¹ = τ_{BP}`.
    pub fn inverse(&self) -> KinematicTransport {
        tau(&(-self.offset))
    }

    pub fn twist(&self, t: &Twist) -> Twist {
        Twist {
            linear: t.linear + self.offset.cross(&t.angular),
            angular: t.angular,
            frame: t.frame,
        }
    }

    pub fn accel(&self, a: &SpatialAccel) -> SpatialAccel {
        SpatialAccel {
            linear: a.linear + self.offset.cross(&a.angular),
            angular: a.angular,
            frame: a.frame,
        }
    }

    /// `τᵀ W`: for `τ_{CP}` this moves a wrench applied at `C` to `P`.
    pub fn wrench(&self, w: &Wrench) -> Wrench {
        Wrench {
            force: w.force,
            torque: w.torque - self.offset.cross(&w.force),
            frame: w.frame,
        }
    }
}

/// `υ_{CP}`: motion vector at `C` from the motion vector at `P` of the same
/// rigid body. `offset_cp` is the vector `CP`, projected in the motion's frame.
pub fn transport_motion(m: &MotionVector18, offset_cp: &Vec3) -> MotionVector18 {
    let t = tau(offset_cp);
    MotionVector18 {
        accel: t.accel(&m.accel),
        twist: t.twist(&m.twist),
        pose: crate::Pose {
            position: m.pose.position - offset_cp,
            attitude: m.pose.attitude,
        },
    }
}
