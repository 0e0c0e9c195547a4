//! Per-body Newton–Euler machinery.

use twoport_spatial::{
    euler_to_dcm, gamma, skew, split, stack, tau, EulerAngles, MotionVector18, Pose, SpatialAccel,
    Twist, Wrench,
};

use crate::{Error, Mat3, Mat6, Result, Vec3, Vec6};

/// Mass properties and named points of a rigid body, all in its body frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyParams {
    pub name: String,
    pub mass: f64,
    /// Center of mass coordinates.
    pub com: Vec3,
    /// Inertia tensor about the center of mass.
    pub inertia: Mat3,
    points: Vec<(String, Vec3)>,
}

impl RigidBodyParams {
    pub fn new(name: impl Into<String>, mass: f64, com: Vec3, inertia: Mat3) -> Result<Self> {
        let body = RigidBodyParams {
            name: name.into(),
            mass,
            com,
            inertia,
            points: Vec::new(),
        };
        body.validate()?;
        Ok(body)
    }

    pub fn point_mass(name: impl Into<String>, mass: f64, com: Vec3) -> Result<Self> {
        Self::new(name, mass, com, Mat3::zeros())
    }

    /// Kinematic connector: no mass, no inertia.
    pub fn massless(name: impl Into<String>) -> Self {
        RigidBodyParams {
            name: name.into(),
            mass: 0.0,
            com: Vec3::zeros(),
            inertia: Mat3::zeros(),
            points: Vec::new(),
        }
    }

    pub fn with_point(mut self, name: impl Into<String>, coords: Vec3) -> Result<Self> {
        self.add_point(name, coords)?;
        Ok(self)
    }

    pub fn add_point(&mut self, name: impl Into<String>, coords: Vec3) -> Result<()> {
        let name = name.into();
        if self.points.iter().any(|(n, _)| *n == name) {
            return Err(Error::DuplicatePoint {
                body: self.name.clone(),
                point: name,
            });
        }
        if !coords.iter().all(|x| x.is_finite()) {
            return Err(self.invalid(format!("point `{name}` is not finite")));
        }
        self.points.push((name, coords));
        Ok(())
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

    pub fn points(&self) -> impl Iterator<Item = (&str, &Vec3)> {
        self.points.iter().map(|(n, p)| (n.as_str(), p))
    }

    pub fn is_massless(&self) -> bool {
        self.mass == 0.0
    }

    fn invalid(&self, reason: String) -> Error {
        Error::InvalidBody {
            body: self.name.clone(),
            reason,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mass.is_finite() || self.mass < 0.0 {
            return Err(self.invalid(format!("mass {} must be finite and non-negative", self.mass)));
        }
        if !self.com.iter().chain(self.inertia.iter()).all(|x| x.is_finite()) {
            return Err(self.invalid("non-finite center of mass or inertia".into()));
        }
        let scale = self.inertia.amax().max(1e-300);
        if (self.inertia - self.inertia.transpose()).amax() > 1e-9 * scale {
            return Err(self.invalid("inertia tensor is not symmetric".into()));
        }
        let eig = self.inertia.symmetric_eigenvalues();
        let mut l = [eig[0], eig[1], eig[2]];
        l.sort_by(|a, b| a.total_cmp(b));
        if l[0] < -1e-12 * scale {
            return Err(self.invalid(format!("inertia tensor is not positive semidefinite (eigenvalue {})", l[0])));
        }
        Ok(())
    }

    /// Principal moments of a solid body satisfy `I₁ + I₂ ≥ I₃`. Tensors
    /// that break this are still simulated; the caller decides whether to
    /// warn.
    pub fn triangle_inequality_violation(&self) -> Option<[f64; 3]> {
        if self.mass <= 0.0 {
            return None;
        }
        let scale = self.inertia.amax();
        let eig = self.inertia.symmetric_eigenvalues();
        let mut l = [eig[0], eig[1], eig[2]];
        l.sort_by(|a, b| a.total_cmp(b));
        (l[0] + l[1] < l[2] - 1e-9 * scale).then_some(l)
    }

    /// `D_P = τ_{BP}ᵀ diag(m 1₃, I_B) τ_{BP}` at the point with body coordinates `p`.
    pub fn dynamic_model_at(&self, p: &Vec3) -> DynamicModel {
        let mut d_b = Mat6::zeros();
        d_b.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(Mat3::identity() * self.mass));
        d_b.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.inertia);
        let t = tau(&(p - self.com)).matrix();
        let d = t.transpose() * d_b * t;
        // exact symmetry
        DynamicModel((d + d.transpose()) * 0.5)
    }

    pub fn dynamic_model_at_point(&self, name: &str) -> Result<DynamicModel> {
        Ok(self.dynamic_model_at(&self.point(name)?))
    }
}

/// 6×6 mass matrix of a body at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicModel(pub Mat6);

impl DynamicModel {
    pub fn matrix(&self) -> &Mat6 {
        &self.0
    }

    pub fn mass(&self) -> f64 {
        self.0[(0, 0)]
    }

    pub fn kinetic_energy(&self, twist: &Vec6) -> f64 {
        0.5 * twist.dot(&(self.0 * twist))
    }

    pub fn inverse(&self, body: &str) -> Result<Mat6> {
        let chol = nalgebra::Cholesky::new(self.0).ok_or_else(|| Error::SingularDynamicModel {
            body: body.to_string(),
        })?;
        Ok(chol.inverse())
    }
}

/// `C(x') = [[(*ω), 0], [(*v), (*ω)]]`.
pub fn gyroscopic_matrix(twist: &Vec6) -> Mat6 {
    let (v, w) = split(twist);
    let mut c = Mat6::zeros();
    let sw = skew(&w);
    c.fixed_view_mut::<3, 3>(0, 0).copy_from(&sw);
    c.fixed_view_mut::<3, 3>(3, 3).copy_from(&sw);
    c.fixed_view_mut::<3, 3>(3, 0).copy_from(&skew(&v));
    c
}

/// `C(x') D_P x'` as a raw 6-vector.
pub fn gyroscopic_term(d: &DynamicModel, twist: &Vec6) -> Vec6 {
    gyroscopic_matrix(twist) * (d.0 * twist)
}

/// Velocity-dependent wrench of the factorized Newton–Euler equation.
pub fn gyroscopic_wrench(d: &DynamicModel, twist: &Twist) -> Wrench {
    Wrench::from_vector(&gyroscopic_term(d, &twist.to_vector()), twist.frame)
}

/// Gravity stacked as a spatial acceleration `[P_{b/i}ᵀ g; 0]`.
pub fn gravity_in_body(attitude: &EulerAngles, gravity: &Vec3) -> Vec6 {
    let g_b = euler_to_dcm(attitude).apply_transpose(gravity);
    stack(&g_b, &Vec3::zeros())
}

/// Forward dynamics at `P`:
/// `ẋ' = D_P⁻¹ (W_ext − C(x') D_P x') + [P_{b/i}ᵀ g; 0]`.
pub fn newton_euler_forward(
    body: &RigidBodyParams,
    p: &Vec3,
    twist: &Twist,
    attitude: &EulerAngles,
    w_ext: &Wrench,
    gravity: &Vec3,
) -> Result<SpatialAccel> {
    twist.frame.check(w_ext.frame)?;
    let d = body.dynamic_model_at(p);
    let d_inv = d.inverse(&body.name)?;
    let x1 = twist.to_vector();
    let accel = d_inv * (w_ext.to_vector() - gyroscopic_term(&d, &x1)) + gravity_in_body(attitude, gravity);
    Ok(SpatialAccel::from_vector(&accel, twist.frame))
}

/// Inverse dynamics at `P`: `W = D_P (ẋ' − [P_{b/i}ᵀ g; 0]) + C(x') D_P x'`.
pub fn newton_euler_inverse(body: &RigidBodyParams, p: &Vec3, m: &MotionVector18, gravity: &Vec3) -> Wrench {
    let d = body.dynamic_model_at(p);
    let x1 = m.twist.to_vector();
    let dx1 = m.accel.to_vector();
    let w = d.0 * (dx1 - gravity_in_body(&m.pose.attitude, gravity)) + gyroscopic_term(&d, &x1);
    Wrench::from_vector(&w, m.frame())
}

/// Inertial acceleration `x'' = [v̇ + ω × v; ω̇]`.
pub fn inertial_acceleration(accel: &Vec6, twist: &Vec6) -> Vec6 {
    let (dv, dw) = split(accel);
    let (v, w) = split(twist);
    stack(&(dv + w.cross(&v)), &dw)
}

/// Newton–Euler in terms of the inertial acceleration:
/// `W = D_P x'' + W_P(ω)` with the explicit ω-squared wrench.
pub fn inertial_form_wrench(body: &RigidBodyParams, p: &Vec3, x2: &Vec6, omega: &Vec3) -> Vec6 {
    let d = body.dynamic_model_at(p);
    let bp = p - body.com;
    let sw = skew(omega);
    let sbp = skew(&bp);
    let force = body.mass * sw * sbp * omega;
    let torque = sw * (body.inertia - body.mass * sbp * sbp) * omega;
    d.0 * x2 + stack(&force, &torque)
}

/// Newton–Euler with the spatial acceleration: `W = D_P ẋ' + C(x') D_P x'`.
pub fn spatial_form_wrench(body: &RigidBodyParams, p: &Vec3, accel: &Vec6, twist: &Vec6) -> Vec6 {
    let d = body.dynamic_model_at(p);
    d.0 * accel + gyroscopic_term(&d, twist)
}

/// Pose kinematics in the body frame: `[İP; Θ̇] = [[1, (*IP)], [0, Γ(Θ)]] x'`.
pub fn pose_rate(twist: &Twist, pose: &Pose) -> Result<(Vec3, Vec3)> {
    let g = gamma(&pose.attitude)?;
    let position_rate = twist.linear + pose.position.cross(&twist.angular);
    Ok((position_rate, g * twist.angular))
}

/// The twelve slow states of a free body at its reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub twist: Twist,
    pub pose: Pose,
}

impl BodyState {
    pub fn to_slice(&self, out: &mut [f64]) {
        out[0..3].copy_from_slice(self.twist.linear.as_slice());
        out[3..6].copy_from_slice(self.twist.angular.as_slice());
        out[6..9].copy_from_slice(self.pose.position.as_slice());
        out[9..12].copy_from_slice(self.pose.attitude.angles.as_slice());
    }
}
