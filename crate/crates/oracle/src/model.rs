use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use twoport_spatial::{euler_to_dcm, gamma_inverse, rot_exp, EulerAngles, EulerSequence, Mat3, Vec3};

use crate::{OracleError, Result};

/// Step of the central second difference of `T` used for the mass matrix.
const HESSIAN_STEP: f64 = 1e-5;
/// Step of the five-point stencils taken along the coordinates.
const STENCIL_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LinkBody {
    pub mass: f64,
    /// Centre of mass in link coordinates.
    pub com: Vec3,
    /// Inertia about the centre of mass, link axes.
    pub inertia: Mat3,
}

/// How a link hangs on its parent. `attach` is in parent coordinates
/// (inertial when the parent is the ground), `point` in link coordinates, and
/// the rotations map link coordinates to parent coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Connection {
    /// Six coordinates: inertial position of `point`, then the Euler angles
    /// stored by axis.
    Free { point: Vec3, sequence: EulerSequence },
    Weld { attach: Vec3, point: Vec3, dcm: Mat3 },
    /// One angle about `axis` (link coordinates); rotation `dcm0 · exp(q axis)`.
    Revolute { attach: Vec3, point: Vec3, dcm0: Mat3, axis: Vec3 },
    /// One slide along `axis` (link coordinates); `point` sits at
    /// `attach + q axis`.
    Prismatic { attach: Vec3, point: Vec3, dcm: Mat3, axis: Vec3 },
}

impl Connection {
    fn dofs(&self) -> usize {
        match self {
            Connection::Free { .. } => 6,
            Connection::Weld { .. } => 0,
            _ => 1,
        }
    }
}

/// Linear spring-damper plus an optional time profile on a one-DOF joint.
#[derive(Clone, Default)]
pub struct JointForce {
    pub stiffness: f64,
    pub damping: f64,
    pub reference: f64,
    pub actuation: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for JointForce {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JointForce")
            .field("stiffness", &self.stiffness)
            .field("damping", &self.damping)
            .field("reference", &self.reference)
            .field("actuation", &self.actuation.is_some())
            .finish()
    }
}

impl JointForce {
    fn value(&self, q: f64, rate: f64, t: f64) -> f64 {
        -self.stiffness * (q - self.reference) - self.damping * rate + self.actuation.as_ref().map_or(0.0, |a| a(t))
    }
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub body: LinkBody,
    /// Index of an earlier link, `None` for the ground.
    pub parent: Option<usize>,
    pub connection: Connection,
    pub force: JointForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadFrame {
    Inertial,
    Link,
}

/// Constant force and torque applied at a link point.
#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub link: usize,
    pub point: Vec3,
    pub force: Vec3,
    pub torque: Vec3,
    pub frame: LoadFrame,
}

#[derive(Debug, Clone)]
pub struct MinimalModel {
    pub links: Vec<Link>,
    pub loads: Vec<Load>,
    pub gravity: Vec3,
    offsets: Vec<usize>,
    dofs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OracleEnergy {
    pub kinetic: f64,
    pub gravity: f64,
    pub springs: f64,
    /// `−F·r` of constant inertial forces.
    pub loads: f64,
}

impl OracleEnergy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.gravity + self.springs + self.loads
    }
}

#[derive(Debug, Clone, Copy)]
struct LinkFrame {
    rot: Mat3,
    origin: Vec3,
    /// Inertial attach point (or the free reference point).
    anchor: Vec3,
    /// Inertial joint point of the link.
    joint: Vec3,
    /// Inertial joint axis, or `R E(Θ)` columns for a free link.
    axis: Vec3,
    euler_rate: Mat3,
}

/// Link frames at one configuration; velocities are linear in `q̇` from here.
struct Configuration {
    frames: Vec<LinkFrame>,
}

impl MinimalModel {
    pub fn new(links: Vec<Link>, loads: Vec<Load>, gravity: Vec3) -> Result<Self> {
        let mut offsets = Vec::with_capacity(links.len());
        let mut dofs = 0;
        let mut links = links;
        for (i, link) in links.iter_mut().enumerate() {
            let bad = |msg: &str| OracleError::InvalidModel(format!("link `{}`: {msg}", link.name));
            if let Some(p) = link.parent {
                if p >= i {
                    return Err(bad("parent must precede the link"));
                }
                if matches!(link.connection, Connection::Free { .. }) {
                    return Err(bad("free links cannot have a parent"));
                }
            }
            if !(link.body.mass >= 0.0) {
                return Err(bad("negative mass"));
            }
            match &mut link.connection {
                Connection::Revolute { axis, .. } | Connection::Prismatic { axis, .. } => {
                    let n = axis.norm();
                    if !(n > 1e-12) {
                        return Err(bad("zero axis"));
                    }
                    *axis /= n;
                }
                _ => {}
            }
            offsets.push(dofs);
            dofs += link.connection.dofs();
        }
        for l in &loads {
            if l.link >= links.len() {
                return Err(OracleError::InvalidModel(format!("load on unknown link {}", l.link)));
            }
        }
        Ok(MinimalModel {
            links,
            loads,
            gravity,
            offsets,
            dofs,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.dofs
    }

    /// First coordinate of a link.
    pub fn offset(&self, link: usize) -> usize {
        self.offsets[link]
    }

    pub fn dof_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dofs);
        for l in &self.links {
            match l.connection {
                Connection::Free { .. } => {
                    for s in ["x", "y", "z", "phi", "theta", "psi"] {
                        names.push(format!("{}.{s}", l.name));
                    }
                }
                Connection::Weld { .. } => {}
                _ => names.push(l.name.clone()),
            }
        }
        names
    }

    fn check(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dofs {
            return Err(OracleError::Length {
                expected: self.dofs,
                found: v.len(),
            });
        }
        Ok(())
    }

    fn configure(&self, q: &DVector<f64>) -> Configuration {
        let mut frames: Vec<LinkFrame> = Vec::with_capacity(self.links.len());
        for (i, link) in self.links.iter().enumerate() {
            let o = self.offsets[i];
            let (prot, porigin) = match link.parent {
                Some(p) => (frames[p].rot, frames[p].origin),
                None => (Mat3::identity(), Vec3::zeros()),
            };
            let frame = match &link.connection {
                Connection::Free { point, sequence } => {
                    let r = Vec3::new(q[o], q[o + 1], q[o + 2]);
                    let th = EulerAngles::new(Vec3::new(q[o + 3], q[o + 4], q[o + 5]), *sequence);
                    let rot = *euler_to_dcm(&th).matrix();
                    LinkFrame {
                        rot,
                        origin: r - rot * point,
                        anchor: r,
                        joint: r,
                        axis: Vec3::zeros(),
                        euler_rate: rot * gamma_inverse(&th),
                    }
                }
                Connection::Weld { attach, point, dcm } => {
                    let a = porigin + prot * attach;
                    let rot = prot * dcm;
                    LinkFrame {
                        rot,
                        origin: a - rot * point,
                        anchor: a,
                        joint: a,
                        axis: Vec3::zeros(),
                        euler_rate: Mat3::zeros(),
                    }
                }
                Connection::Revolute { attach, point, dcm0, axis } => {
                    let a = porigin + prot * attach;
                    let turn = rot_exp(axis, q[o]).expect("axis normalized on construction");
                    let rot = prot * dcm0 * turn.matrix();
                    LinkFrame {
                        rot,
                        origin: a - rot * point,
                        anchor: a,
                        joint: a,
                        axis: rot * axis,
                        euler_rate: Mat3::zeros(),
                    }
                }
                Connection::Prismatic { attach, point, dcm, axis } => {
                    let a = porigin + prot * attach;
                    let rot = prot * dcm;
                    let j = a + rot * (q[o] * axis);
                    LinkFrame {
                        rot,
                        origin: j - rot * point,
                        anchor: a,
                        joint: j,
                        axis: rot * axis,
                        euler_rate: Mat3::zeros(),
                    }
                }
            };
            frames.push(frame);
        }
        Configuration { frames }
    }

    /// Inertial angular velocity and velocity of the link origin, per link.
    fn velocities(&self, c: &Configuration, qd: &DVector<f64>) -> Vec<(Vec3, Vec3)> {
        let mut out: Vec<(Vec3, Vec3)> = Vec::with_capacity(self.links.len());
        for (i, link) in self.links.iter().enumerate() {
            let f = &c.frames[i];
            let o = self.offsets[i];
            let (wp, vp, op) = match link.parent {
                Some(p) => (out[p].0, out[p].1, c.frames[p].origin),
                None => (Vec3::zeros(), Vec3::zeros(), Vec3::zeros()),
            };
            let va = vp + wp.cross(&(f.anchor - op));
            let vel = match link.connection {
                Connection::Free { .. } => {
                    let w = f.euler_rate * Vec3::new(qd[o + 3], qd[o + 4], qd[o + 5]);
                    (w, Vec3::new(qd[o], qd[o + 1], qd[o + 2]) + w.cross(&(f.origin - f.anchor)))
                }
                Connection::Weld { .. } => (wp, va + wp.cross(&(f.origin - f.anchor))),
                Connection::Revolute { .. } => {
                    let w = wp + f.axis * qd[o];
                    (w, va + w.cross(&(f.origin - f.anchor)))
                }
                Connection::Prismatic { .. } => {
                    let vj = va + wp.cross(&(f.joint - f.anchor)) + f.axis * qd[o];
                    (wp, vj + wp.cross(&(f.origin - f.joint)))
                }
            };
            out.push(vel);
        }
        out
    }

    fn kinetic(&self, c: &Configuration, qd: &DVector<f64>) -> f64 {
        let vel = self.velocities(c, qd);
        let mut t = 0.0;
        for ((link, f), (w, vo)) in self.links.iter().zip(&c.frames).zip(&vel) {
            let b = &link.body;
            let vc = vo + w.cross(&(f.rot * b.com));
            let wb = f.rot.transpose() * w;
            t += 0.5 * b.mass * vc.norm_squared() + 0.5 * wb.dot(&(b.inertia * wb));
        }
        t
    }

    fn gravity_potential(&self, c: &Configuration) -> f64 {
        self.links
            .iter()
            .zip(&c.frames)
            .map(|(l, f)| -l.body.mass * self.gravity.dot(&(f.origin + f.rot * l.body.com)))
            .sum()
    }

    /// `∂T/∂q̇` by central differences; exact for a quadratic form, so the
    /// step is sized to the rates to keep rounding small.
    fn momentum(&self, c: &Configuration, qd: &DVector<f64>) -> DVector<f64> {
        let h = qd.amax().max(1.0);
        let mut p = DVector::zeros(self.dofs);
        let mut x = qd.clone();
        for i in 0..self.dofs {
            x[i] = qd[i] + h;
            let plus = self.kinetic(c, &x);
            x[i] = qd[i] - h;
            let minus = self.kinetic(c, &x);
            x[i] = qd[i];
            p[i] = (plus - minus) / (2.0 * h);
        }
        p
    }

    /// Generalized forces of the joint drives and the constant loads.
    fn applied_forces(&self, c: &Configuration, q: &DVector<f64>, qd: &DVector<f64>, t: f64) -> DVector<f64> {
        let mut f = DVector::zeros(self.dofs);
        for (i, link) in self.links.iter().enumerate() {
            if link.connection.dofs() == 1 {
                let o = self.offsets[i];
                f[o] = link.force.value(q[o], qd[o], t);
            }
        }
        if self.loads.is_empty() {
            return f;
        }
        let mut unit = DVector::zeros(self.dofs);
        for j in 0..self.dofs {
            unit[j] = 1.0;
            let vel = self.velocities(c, &unit);
            unit[j] = 0.0;
            for l in &self.loads {
                let fr = &c.frames[l.link];
                let (w, vo) = vel[l.link];
                let v = vo + w.cross(&(fr.rot * l.point));
                let (force, torque) = match l.frame {
                    LoadFrame::Inertial => (l.force, l.torque),
                    LoadFrame::Link => (fr.rot * l.force, fr.rot * l.torque),
                };
                f[j] += force.dot(&v) + torque.dot(&w);
            }
        }
        f
    }

    pub fn energy(&self, q: &DVector<f64>, qd: &DVector<f64>) -> Result<OracleEnergy> {
        self.check(q)?;
        self.check(qd)?;
        let c = self.configure(q);
        let mut e = OracleEnergy {
            kinetic: self.kinetic(&c, qd),
            gravity: self.gravity_potential(&c),
            ..Default::default()
        };
        for (i, link) in self.links.iter().enumerate() {
            if link.connection.dofs() == 1 {
                let d = q[self.offsets[i]] - link.force.reference;
                e.springs += 0.5 * link.force.stiffness * d * d;
            }
        }
        for l in self.loads.iter().filter(|l| l.frame == LoadFrame::Inertial) {
            let f = &c.frames[l.link];
            e.loads -= l.force.dot(&(f.origin + f.rot * l.point));
        }
        Ok(e)
    }

    /// Inertial position of a link point.
    pub fn point_position(&self, q: &DVector<f64>, link: usize, point: &Vec3) -> Result<Vec3> {
        self.check(q)?;
        let f = self.configure(q).frames[link];
        Ok(f.origin + f.rot * point)
    }

    /// Link-to-inertial rotation.
    pub fn link_rotation(&self, q: &DVector<f64>, link: usize) -> Result<Mat3> {
        self.check(q)?;
        Ok(self.configure(q).frames[link].rot)
    }

    /// Link-frame velocity `[v; ω]` of a link point.
    pub fn point_twist(&self, q: &DVector<f64>, qd: &DVector<f64>, link: usize, point: &Vec3) -> Result<[Vec3; 2]> {
        self.check(q)?;
        self.check(qd)?;
        let c = self.configure(q);
        let f = &c.frames[link];
        let (w, vo) = self.velocities(&c, qd)[link];
        let v = vo + w.cross(&(f.rot * point));
        Ok([f.rot.transpose() * v, f.rot.transpose() * w])
    }

    /// Body-frame twist of the reference point of a free link and its
    /// body-frame derivative, from minimal-coordinate rates and accelerations.
    pub fn free_link_motion(
        &self,
        link: usize,
        q: &DVector<f64>,
        qd: &DVector<f64>,
        qdd: &DVector<f64>,
    ) -> Result<([Vec3; 2], [Vec3; 2])> {
        self.check(q)?;
        let Connection::Free { sequence, .. } = self.links[link].connection else {
            return Err(OracleError::InvalidModel(format!("link `{}` is not free", self.links[link].name)));
        };
        let o = self.offsets[link];
        let part = |v: &DVector<f64>, k: usize| Vec3::new(v[o + k], v[o + k + 1], v[o + k + 2]);
        let th = part(q, 3);
        let rot = *euler_to_dcm(&EulerAngles::new(th, sequence)).matrix();
        let e = |a: &Vec3| gamma_inverse(&EulerAngles::new(*a, sequence));
        let thd = part(qd, 3);
        let v = rot.transpose() * part(qd, 0);
        let w = e(&th) * thd;
        let h = STENCIL_STEP / thd.amax().max(f64::MIN_POSITIVE);
        let de = if thd.amax() > 0.0 {
            stencil(|s| e(&(th + thd * s)), h)
        } else {
            Mat3::zeros()
        };
        let vd = rot.transpose() * part(qdd, 0) - w.cross(&v);
        let wd = e(&th) * part(qdd, 3) + de * thd;
        Ok(([v, w], [vd, wd]))
    }

    /// Minimal-coordinate rates of a free link from its body-frame twist.
    pub fn free_link_rates(&self, link: usize, q: &DVector<f64>, v: &Vec3, w: &Vec3) -> Result<(Vec3, Vec3)> {
        self.check(q)?;
        let Connection::Free { sequence, .. } = self.links[link].connection else {
            return Err(OracleError::InvalidModel(format!("link `{}` is not free", self.links[link].name)));
        };
        let o = self.offsets[link];
        let th = EulerAngles::new(Vec3::new(q[o + 3], q[o + 4], q[o + 5]), sequence);
        let rot = *euler_to_dcm(&th).matrix();
        let g = gamma_inverse(&th)
            .try_inverse()
            .ok_or(OracleError::ChartSingularity(q[o + 3 + sequence.middle_axis()]))?;
        Ok((rot * v, g * w))
    }
}

/// Five-point central derivative at zero of a matrix-valued function.
fn stencil<F, T>(f: F, h: f64) -> T
where
    F: Fn(f64) -> T,
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    (f(-2.0 * h) - f(2.0 * h) + (f(h) - f(-h)) * 8.0) * (1.0 / (12.0 * h))
}

/// `M(q) = ∂²T/∂q̇²` by central second differences of `T` about `q̇ = 0`,
/// symmetrized and checked for positive definiteness.
pub fn oracle_mass_matrix(model: &MinimalModel, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    model.check(q)?;
    let c = model.configure(q);
    let m = mass_matrix_at(model, &c);
    if m.clone().cholesky().is_none() {
        return Err(OracleError::NotPositiveDefinite);
    }
    Ok(m)
}

fn mass_matrix_at(model: &MinimalModel, c: &Configuration) -> DMatrix<f64> {
    let n = model.dofs;
    let h = HESSIAN_STEP;
    let mut m = DMatrix::zeros(n, n);
    let mut u = DVector::zeros(n);
    let t = |u: &DVector<f64>| model.kinetic(c, u);
    for i in 0..n {
        for j in i..n {
            let mut sum = 0.0;
            for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                u[i] += si * h;
                u[j] += sj * h;
                sum += sign * t(&u);
                u[i] = 0.0;
                u[j] = 0.0;
            }
            m[(i, j)] = sum / (4.0 * h * h);
        }
    }
    let upper = m.clone();
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = upper[(j, i)];
        }
    }
    m
}

/// `q̈ = M⁻¹(Q − Ṁq̇ + ∂T/∂q − ∂V/∂q)`; the Lagrange terms and the gravity
/// gradient come from five-point stencils.
pub fn oracle_accel(model: &MinimalModel, q: &DVector<f64>, qd: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    model.check(q)?;
    model.check(qd)?;
    let n = model.dofs;
    let c = model.configure(q);
    let m = mass_matrix_at(model, &c);
    let h = STENCIL_STEP;

    let mut rhs = model.applied_forces(&c, q, qd, t);
    let mut x = q.clone();
    for k in 0..n {
        let mut eval = |s: f64| {
            x[k] = q[k] + s;
            let ck = model.configure(&x);
            x[k] = q[k];
            (model.kinetic(&ck, qd), model.gravity_potential(&ck))
        };
        let (t2m, v2m) = eval(-2.0 * h);
        let (t1m, v1m) = eval(-h);
        let (t1p, v1p) = eval(h);
        let (t2p, v2p) = eval(2.0 * h);
        let dt = (t2m - t2p + 8.0 * (t1p - t1m)) / (12.0 * h);
        let dv = (v2m - v2p + 8.0 * (v1p - v1m)) / (12.0 * h);
        rhs[k] += dt - dv;
    }

    let speed = qd.amax();
    if speed > 0.0 {
        let hs = h / speed;
        let mdot = stencil(|s| model.momentum(&model.configure(&(q + qd * s)), qd), hs);
        rhs -= mdot;
    }

    let chol = m.cholesky().ok_or(OracleError::NotPositiveDefinite)?;
    Ok(chol.solve(&rhs))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleTrajectory {
    pub times: Vec<f64>,
    pub q: Vec<DVector<f64>>,
    pub qd: Vec<DVector<f64>>,
}

/// Classic RK4 on `(q, q̇)` with a fixed step; the last step is shortened to
/// land on `t_final`.
pub fn integrate_rk4(
    model: &MinimalModel,
    q0: &DVector<f64>,
    qd0: &DVector<f64>,
    dt: f64,
    t_final: f64,
) -> Result<OracleTrajectory> {
    model.check(q0)?;
    model.check(qd0)?;
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(OracleError::InvalidModel(format!("bad step {dt} or horizon {t_final}")));
    }
    let ratio = t_final / dt;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.round().max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let mut out = OracleTrajectory::default();
    let (mut q, mut qd) = (q0.clone(), qd0.clone());
    out.times.push(0.0);
    out.q.push(q.clone());
    out.qd.push(qd.clone());
    let f = |t: f64, q: &DVector<f64>, qd: &DVector<f64>| oracle_accel(model, q, qd, t);
    for k in 0..steps {
        let t = k as f64 * dt;
        let t1 = if k + 1 == steps { t_final } else { (k + 1) as f64 * dt };
        let h = t1 - t;
        let a1 = f(t, &q, &qd)?;
        let (q2, v2) = (&q + &qd * (0.5 * h), &qd + &a1 * (0.5 * h));
        let a2 = f(t + 0.5 * h, &q2, &v2)?;
        let (q3, v3) = (&q + &v2 * (0.5 * h), &qd + &a2 * (0.5 * h));
        let a3 = f(t + 0.5 * h, &q3, &v3)?;
        let (q4, v4) = (&q + &v3 * h, &qd + &a3 * h);
        let a4 = f(t1, &q4, &v4)?;
        q += (&qd + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        qd += (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0);
        out.times.push(t1);
        out.q.push(q.clone());
        out.qd.push(qd.clone());
    }
    Ok(out)
}
