use nalgebra::SVector;

use crate::euler::{dcm_to_euler, euler_to_dcm, EulerAngles, EulerSequence};
use crate::{stack, Dcm, FrameId, SpatialError, Vec3, Vec6};

/// Twist `[v_P; ω]` of a body at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub linear: Vec3,
    pub angular: Vec3,
    pub frame: FrameId,
}

/// Spatial acceleration `[v̇_P; ω̇]`: body-frame derivative of the twist.
///
/// The inertial acceleration of the point is `v̇ + ω × v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialAccel {
    pub linear: Vec3,
    pub angular: Vec3,
    pub frame: FrameId,
}

/// Wrench `[F; T_P]` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
    pub frame: FrameId,
}

macro_rules! dual_vector {
    ($ty:ident, $a:ident, $b:ident) => {
        impl $ty {
            pub fn new($a: Vec3, $b: Vec3, frame: FrameId) -> Self {
                $ty { $a, $b, frame }
            }

            pub fn zero(frame: FrameId) -> Self {
                $ty {
                    $a: Vec3::zeros(),
                    $b: Vec3::zeros(),
                    frame,
                }
            }

            pub fn from_vector(v: &Vec6, frame: FrameId) -> Self {
                let (top, bottom) = crate::split(v);
                $ty {
                    $a: top,
                    $b: bottom,
                    frame,
                }
            }

            pub fn to_vector(&self) -> Vec6 {
                stack(&self.$a, &self.$b)
            }

            /// Re-express in another frame; `rotation` is `P_{self.frame/to}`.
            pub fn reproject(&self, rotation: &Dcm, to: FrameId) -> Self {
                $ty {
                    $a: rotation.apply(&self.$a),
                    $b: rotation.apply(&self.$b),
                    frame: to,
                }
            }

            pub fn checked_add(&self, other: &Self) -> Result<Self, SpatialError> {
                self.frame.check(other.frame)?;
                Ok($ty {
                    $a: self.$a + other.$a,
                    $b: self.$b + other.$b,
                    frame: self.frame,
                })
            }

            pub fn checked_sub(&self, other: &Self) -> Result<Self, SpatialError> {
                self.frame.check(other.frame)?;
                Ok($ty {
                    $a: self.$a - other.$a,
                    $b: self.$b - other.$b,
                    frame: self.frame,
                })
            }

            pub fn scaled(&self, k: f64) -> Self {
                $ty {
                    $a: self.$a * k,
                    $b: self.$b * k,
                    frame: self.frame,
                }
            }
        }
    };
}

dual_vector!(Twist, linear, angular);
dual_vector!(SpatialAccel, linear, angular);
dual_vector!(Wrench, force, torque);

/// Pose `[IP; Θ]`: the position is projected in the owning motion's frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vec3,
    pub attitude: EulerAngles,
}

impl Pose {
    pub fn origin(sequence: EulerSequence) -> Self {
        Pose {
            position: Vec3::zeros(),
            attitude: EulerAngles::zero(sequence),
        }
    }
}

/// 18-component motion vector `m = [ẋ'; x'; x]` of a body at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionVector18 {
    pub accel: SpatialAccel,
    pub twist: Twist,
    pub pose: Pose,
}

impl MotionVector18 {
    pub fn new(accel: SpatialAccel, twist: Twist, pose: Pose) -> Result<Self, SpatialError> {
        accel.frame.check(twist.frame)?;
        Ok(MotionVector18 { accel, twist, pose })
    }

    /// A body at rest at the origin with the given attitude.
    pub fn at_rest(frame: FrameId, attitude: EulerAngles) -> Self {
        MotionVector18 {
            accel: SpatialAccel::zero(frame),
            twist: Twist::zero(frame),
            pose: Pose {
                position: Vec3::zeros(),
                attitude,
            },
        }
    }

    pub fn frame(&self) -> FrameId {
        self.twist.frame
    }

    pub fn to_vector(&self) -> SVector<f64, 18> {
        let mut out = SVector::<f64, 18>::zeros();
        out.fixed_rows_mut::<6>(0).copy_from(&self.accel.to_vector());
        out.fixed_rows_mut::<6>(6).copy_from(&self.twist.to_vector());
        out.fixed_rows_mut::<3>(12).copy_from(&self.pose.position);
        out.fixed_rows_mut::<3>(15)
            .copy_from(&self.pose.attitude.angles);
        out
    }

    pub fn from_vector(v: &SVector<f64, 18>, frame: FrameId, sequence: EulerSequence) -> Self {
        MotionVector18 {
            accel: SpatialAccel::from_vector(&v.fixed_rows::<6>(0).into_owned(), frame),
            twist: Twist::from_vector(&v.fixed_rows::<6>(6).into_owned(), frame),
            pose: Pose {
                position: v.fixed_rows::<3>(12).into_owned(),
                attitude: EulerAngles::new(v.fixed_rows::<3>(15).into_owned(), sequence),
            },
        }
    }

    /// Pure projection change by `P^{18}`: the Euler slot is left untouched.
    /// `rotation` is `P_{self.frame/to}`.
    pub fn reproject(&self, rotation: &Dcm, to: FrameId) -> Self {
        let v = rotation.augmented_motion() * self.to_vector();
        Self::from_vector(&v, to, self.pose.attitude.sequence)
    }

    /// Motion of a rigidly attached body whose frame `a` is related to the
    /// current frame `b` by `rotation = P_{a/b}`: projects with `P_{a/b}ᵀ`
    /// and composes the attitude as `Θ^A = Θ(P(Θ^B) P_{a/b})`.
    pub fn into_attached_frame(&self, rotation: &Dcm, to: FrameId) -> Result<Self, SpatialError> {
        let mut out = self.reproject(&rotation.transpose(), to);
        let p = euler_to_dcm(&self.pose.attitude).compose(rotation);
        out.pose.attitude = dcm_to_euler(&p, self.pose.attitude.sequence)?;
        Ok(out)
    }
}
