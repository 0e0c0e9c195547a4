//! Block parameter records and the joint kinematics shared by standalone
//! evaluation and the assembled system.

use twoport_spatial::{
    dcm_to_euler, euler_to_dcm, rot_exp, split, stack, tau, unit, Dcm, EulerAngles, EulerSequence,
    MotionVector18, Pose, SpatialAccel, Twist,
};

use crate::body::{BodyState, RigidBodyParams};
use crate::drive::DriveLaw;
use crate::{Error, Mat6, Result, Vec3, Vec6};

/// Free-floating body integrated with 12 slow states at one of its points.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeBody {
    pub body: RigidBodyParams,
    /// Point at which twist and pose are carried.
    pub point: String,
    pub initial: BodyState,
}

impl FreeBody {
    pub fn new(body: RigidBodyParams, point: impl Into<String>, sequence: EulerSequence) -> Result<Self> {
        let point = point.into();
        body.point(&point)?;
        Ok(FreeBody {
            body,
            point,
            initial: BodyState {
                twist: Twist::zero(twoport_spatial::FrameId::INERTIAL),
                pose: Pose::origin(sequence),
            },
        })
    }

    /// Initial pose from the inertial position of the point and the attitude.
    pub fn with_inertial_pose(mut self, position: Vec3, attitude: EulerAngles) -> Result<Self> {
        attitude.check_chart()?;
        self.initial.pose = Pose {
            position: euler_to_dcm(&attitude).apply_transpose(&position),
            attitude,
        };
        Ok(self)
    }

    /// Initial twist at the point, projected in the body frame.
    pub fn with_twist(mut self, linear: Vec3, angular: Vec3) -> Self {
        self.initial.twist.linear = linear;
        self.initial.twist.angular = angular;
        self
    }
}

/// Prescribed motion at the origin of a reference frame. At rest it is a
/// clamped anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSource {
    pub name: String,
    points: Vec<(String, Vec3)>,
    /// Inertial position of the origin.
    pub position: Vec3,
    /// `P_{s/i}`.
    pub attitude: Dcm,
    /// Twist and spatial acceleration of the origin, in the source frame.
    pub twist: Vec6,
    pub accel: Vec6,
}

impl MotionSource {
    pub fn anchor(name: impl Into<String>) -> Self {
        MotionSource {
            name: name.into(),
            points: Vec::new(),
            position: Vec3::zeros(),
            attitude: Dcm::identity(),
            twist: Vec6::zeros(),
            accel: Vec6::zeros(),
        }
    }

    pub fn with_point(mut self, name: impl Into<String>, coords: Vec3) -> Result<Self> {
        let name = name.into();
        if self.points.iter().any(|(n, _)| *n == name) {
            return Err(Error::DuplicatePoint {
                body: self.name.clone(),
                point: name,
            });
        }
        self.points.push((name, coords));
        Ok(self)
    }

    /// Prescribed motion expressed as a motion vector at the origin.
    pub fn with_motion(mut self, m: &MotionVector18) -> Self {
        let attitude = euler_to_dcm(&m.pose.attitude);
        self.position = attitude.apply(&m.pose.position);
        self.attitude = attitude;
        self.twist = m.twist.to_vector();
        self.accel = m.accel.to_vector();
        self
    }

    pub fn point(&self, name: &str) -> Result<Vec3> {
        self.points
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| *p)
            .ok_or_else(|| Error::UnknownPoint {
                body: self.name.clone(),
                point: name.to_string(),
            })
    }
}

/// Rigid attachment of a child body; `dcm` is `P_{a/b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeldJoint {
    pub body: RigidBodyParams,
    /// Child point coincident with the parent's attachment point.
    pub point: String,
    pub dcm: Dcm,
}

impl WeldJoint {
    pub fn new(body: RigidBodyParams, point: impl Into<String>, dcm: Dcm) -> Result<Self> {
        let point = point.into();
        body.point(&point)?;
        Ok(WeldJoint { body, point, dcm })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevoluteJoint {
    pub name: String,
    pub body: RigidBodyParams,
    pub point: String,
    /// Unit axis in the child frame.
    pub axis: Vec3,
    /// `P_{a0/b}`.
    pub dcm0: Dcm,
    pub theta0: f64,
    pub rate0: f64,
    pub drive: DriveLaw,
    /// Angle held fixed; the drive torque becomes a reaction.
    pub locked: bool,
}

impl RevoluteJoint {
    pub fn new(
        name: impl Into<String>,
        body: RigidBodyParams,
        point: impl Into<String>,
        axis: Vec3,
        dcm0: Dcm,
    ) -> Result<Self> {
        let name = name.into();
        let point = point.into();
        let axis = unit(&axis).map_err(|_| Error::InvalidJoint {
            joint: name.clone(),
            reason: "axis has zero length".into(),
        })?;
        let p = body.point(&point)?;
        revolute_inertia(&body, &p, &axis).map_err(|e| match e {
            Error::DegenerateJointInertia { value, .. } => Error::DegenerateJointInertia {
                joint: name.clone(),
                value,
            },
            e => e,
        })?;
        Ok(RevoluteJoint {
            name,
            body,
            point,
            axis,
            dcm0,
            theta0: 0.0,
            rate0: 0.0,
            drive: DriveLaw::free(),
            locked: false,
        })
    }

    pub fn with_initial(mut self, theta: f64, rate: f64) -> Self {
        self.theta0 = theta;
        self.rate0 = rate;
        self
    }

    pub fn with_drive(mut self, drive: DriveLaw) -> Result<Self> {
        drive.validate()?;
        self.drive = drive;
        Ok(self)
    }

    pub fn locked(mut self) -> Self {
        self.locked = true;
        self
    }

    /// `P_{aθ/b} = P_{a0/b} e^{θ(*r)}`.
    pub fn dcm(&self, theta: f64) -> Dcm {
        revolute_dcm(&self.dcm0, &self.axis, theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrismaticJoint {
    pub name: String,
    pub body: RigidBodyParams,
    /// Child point coincident with the parent's attachment point at zero
    /// extension.
    pub point: String,
    /// Unit axis in the child frame.
    pub axis: Vec3,
    /// `P_{a/b}`.
    pub dcm: Dcm,
    pub x0: f64,
    pub rate0: f64,
    pub drive: DriveLaw,
}

impl PrismaticJoint {
    pub fn new(
        name: impl Into<String>,
        body: RigidBodyParams,
        point: impl Into<String>,
        axis: Vec3,
        dcm: Dcm,
    ) -> Result<Self> {
        let name = name.into();
        let point = point.into();
        let axis = unit(&axis).map_err(|_| Error::InvalidJoint {
            joint: name.clone(),
            reason: "axis has zero length".into(),
        })?;
        body.point(&point)?;
        if !(body.mass > 0.0) {
            return Err(Error::DegenerateJointInertia {
                joint: name,
                value: body.mass,
            });
        }
        Ok(PrismaticJoint {
            name,
            body,
            point,
            axis,
            dcm,
            x0: 0.0,
            rate0: 0.0,
            drive: DriveLaw::free(),
        })
    }

    pub fn with_initial(mut self, x: f64, rate: f64) -> Self {
        self.x0 = x;
        self.rate0 = rate;
        self
    }

    pub fn with_drive(mut self, drive: DriveLaw) -> Result<Self> {
        drive.validate()?;
        self.drive = drive;
        Ok(self)
    }
}

/// Spring-damper between two chain ends that closes a kinematic loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopClosure {
    pub name: String,
    pub stiffness: Mat6,
    pub damping: Mat6,
}

/// Largest Euler-angle discrepancy accepted across a closure (rad).
pub const CLOSURE_ROTATION_LIMIT: f64 = 0.3;

impl LoopClosure {
    pub fn new(name: impl Into<String>, stiffness: Mat6, damping: Mat6) -> Result<Self> {
        let name = name.into();
        for (label, m) in [("stiffness", &stiffness), ("damping", &damping)] {
            let scale = m.amax().max(1e-300);
            let symmetric = (m - m.transpose()).amax() <= 1e-9 * scale;
            let psd = symmetric && m.symmetric_eigenvalues().min() >= -1e-12 * scale;
            if !m.iter().all(|x| x.is_finite()) || !psd {
                return Err(Error::InvalidParameter(format!(
                    "loop closure `{name}`: {label} must be symmetric positive semidefinite"
                )));
            }
        }
        Ok(LoopClosure {
            name,
            stiffness,
            damping,
        })
    }

    /// `W = K Δpose + D Δtwist`.
    pub fn wrench(&self, delta_pose: &Vec6, delta_twist: &Vec6) -> Vec6 {
        self.stiffness * delta_pose + self.damping * delta_twist
    }
}

/// Pose discrepancy of the right end relative to the left one, in the left
/// frame: `[P_{l/i}ᵀ (r_r − r_l); Θ_r − Θ_l]`.
pub(crate) fn closure_pose_error(
    closure: &str,
    left: (&Vec3, &Dcm),
    right: (&Vec3, &Dcm),
    sequence: EulerSequence,
) -> Result<Vec6> {
    let dp = left.1.apply_transpose(&(right.0 - left.0));
    let tl = dcm_to_euler(left.1, sequence)?;
    let tr = dcm_to_euler(right.1, sequence)?;
    let mut dth = tr.angles - tl.angles;
    for a in dth.iter_mut() {
        *a = wrap_angle(*a);
    }
    let angle = dth.amax();
    if angle > CLOSURE_ROTATION_LIMIT {
        return Err(Error::ClosureRotationTooLarge {
            closure: closure.to_string(),
            angle,
            limit: CLOSURE_ROTATION_LIMIT,
        });
    }
    Ok(stack(&dp, &dth))
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

pub fn revolute_dcm(dcm0: &Dcm, axis: &Vec3, theta: f64) -> Dcm {
    match unit(axis).and_then(|r| rot_exp(&r, theta)) {
        Ok(r) => dcm0.compose(&r),
        Err(_) => *dcm0,
    }
}

/// Apparent inertia `J_r = [0; r]ᵀ D_P [0; r]` of a body about an axis through `p`.
pub fn revolute_inertia(body: &RigidBodyParams, p: &Vec3, axis: &Vec3) -> Result<f64> {
    let d = body.dynamic_model_at(p);
    let s = stack(&Vec3::zeros(), axis);
    let j = s.dot(&(d.matrix() * s));
    if !(j > 1e-12 * d.matrix().amax()) {
        return Err(Error::DegenerateJointInertia {
            joint: body.name.clone(),
            value: j,
        });
    }
    Ok(j)
}

/// Velocity-dependent parts of the revolute motion across the joint:
/// spatial-acceleration bias `[−θ̇ (*r) v; −θ̇ (*r) ω]` and twist increment
/// `[0; θ̇ r]`, for a parent twist already projected in the child frame.
pub(crate) fn revolute_increments(axis: &Vec3, rate: f64, parent_twist: &Vec6) -> (Vec6, Vec6) {
    let (v, w) = split(parent_twist);
    let bias = stack(&(-rate * axis.cross(&v)), &(-rate * axis.cross(&w)));
    (bias, stack(&Vec3::zeros(), &(rate * axis)))
}

/// Prismatic counterpart: offset `−x t` for the motion transport from `P0`
/// to `P`, acceleration bias `[−ẋ (*t) ω; 0]` and twist increment `[ẋ t; 0]`.
pub(crate) fn prismatic_increments(axis: &Vec3, x: f64, rate: f64, twist_p0: &Vec6) -> (Vec3, Vec6, Vec6) {
    let (_, w) = split(twist_p0);
    let bias = stack(&(-rate * axis.cross(&w)), &Vec3::zeros());
    (-x * axis, bias, stack(&(rate * axis), &Vec3::zeros()))
}

/// Motion of the child at the joint point from the parent motion at the same
/// point, already projected in the child frame `R_a`. The attitude slot of
/// `m` holds the parent attitude `Θ^B`.
pub fn revolute_motion_across(
    m: &MotionVector18,
    theta: f64,
    rate: f64,
    accel: f64,
    joint: &RevoluteJoint,
) -> Result<MotionVector18> {
    let frame = m.frame();
    let twist = m.twist.to_vector();
    let (bias, inc) = revolute_increments(&joint.axis, rate, &twist);
    let accel = m.accel.to_vector() + bias + stack(&Vec3::zeros(), &(accel * joint.axis));
    let attitude = euler_to_dcm(&m.pose.attitude).compose(&joint.dcm(theta));
    Ok(MotionVector18 {
        accel: SpatialAccel::from_vector(&accel, frame),
        twist: Twist::from_vector(&(twist + inc), frame),
        pose: Pose {
            position: m.pose.position,
            attitude: dcm_to_euler(&attitude, m.pose.attitude.sequence)?,
        },
    })
}

/// Motion at the joint point `P` of the child from its motion at the parent
/// point `P0`, both in the child frame.
pub fn prismatic_motion_across(m: &MotionVector18, x: f64, rate: f64, accel: f64, axis: &Vec3) -> MotionVector18 {
    let frame = m.frame();
    let twist = m.twist.to_vector();
    let (offset, bias, inc) = prismatic_increments(axis, x, rate, &twist);
    let t = tau(&offset).matrix();
    let accel = t * m.accel.to_vector() + bias + stack(&(accel * axis), &Vec3::zeros());
    MotionVector18 {
        accel: SpatialAccel::from_vector(&accel, frame),
        twist: Twist::from_vector(&(t * twist + inc), frame),
        pose: Pose {
            position: m.pose.position - offset,
            attitude: m.pose.attitude,
        },
    }
}
