#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use twoport_core::{BlockId, BodyState, CompiledSystem};
use twoport_oracle::{oracle_accel, Connection, JointForce, Link, LinkBody, Load, LoadFrame, MinimalModel};
use twoport_scenario::cli::{EXIT_INVALID, EXIT_OK, EXIT_RUNTIME};
use twoport_scenario::{build_system, ExternalKind, JointKind, ScenarioConfig};
use twoport_spatial::{euler_to_dcm, rot_exp, EulerAngles, FrameId, Mat3, Pose, Twist, Vec3};

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn balloon_path() -> PathBuf {
    repo_root().join("scenarios/balloon.scn")
}

pub fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/corpus")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

/// Every corpus file and the status `run` must return for it.
pub const CORPUS: [(&str, i32); 13] = [
    ("ok_free_body.scn", EXIT_OK),
    ("syntax_error.scn", EXIT_INVALID),
    ("unknown_key.scn", EXIT_INVALID),
    ("wrong_schema_version.scn", EXIT_INVALID),
    ("wrong_type.scn", EXIT_INVALID),
    ("no_bodies.scn", EXIT_INVALID),
    ("missing_point.scn", EXIT_INVALID),
    ("unattached_body.scn", EXIT_INVALID),
    ("attached_twice.scn", EXIT_INVALID),
    ("indefinite_inertia.scn", EXIT_INVALID),
    ("negative_step.scn", EXIT_INVALID),
    ("bad_revolute.scn", EXIT_INVALID),
    ("into_gimbal_lock.scn", EXIT_RUNTIME),
];

pub fn balloon() -> ScenarioConfig {
    let text = std::fs::read_to_string(balloon_path()).unwrap();
    twoport_scenario::parse_scenario(&text).unwrap()
}

pub fn compile(config: &ScenarioConfig) -> CompiledSystem {
    build_system(config).unwrap().assemble().unwrap()
}

fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn m3(a: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| a[i][j])
}

/// Point coordinates on a body, or inertial coordinates on an anchor.
fn attach_point(config: &ScenarioConfig, owner: &str, point: &str) -> Vec3 {
    if let Some(a) = config.anchors.iter().find(|a| a.name == owner) {
        return v3(&a.position) + v3(&a.points[point]);
    }
    v3(&config.body(owner).unwrap().points[point])
}

/// Independent minimal-coordinate model of a tree scenario (no closures,
/// no wrench tables). Link `i` is `joints[i]`.
pub fn oracle_model(config: &ScenarioConfig) -> MinimalModel {
    assert!(config.loop_closures.is_empty(), "the oracle handles trees only");
    let link_of = |body: &str| config.joints.iter().position(|j| j.body == body);
    let mut links = Vec::new();
    for j in &config.joints {
        let b = config.body(&j.body).unwrap();
        let point = v3(&b.points[&j.point]);
        let parent = j.parent.as_deref().and_then(link_of);
        let attach = match (&j.parent, &j.parent_point) {
            (Some(p), Some(pp)) => attach_point(config, p, pp),
            _ => Vec3::zeros(),
        };
        let dcm = j.rotation.as_ref().map_or(Mat3::identity(), m3);
        let axis = j.axis.as_ref().map_or(Vec3::z(), v3);
        let connection = match j.kind {
            JointKind::Free => Connection::Free {
                point,
                sequence: config.sequence(),
            },
            JointKind::Weld => Connection::Weld { attach, point, dcm },
            JointKind::Revolute if j.locked == Some(true) => {
                let q = j.initial.unwrap_or(0.0);
                let turn = *rot_exp(&axis.normalize(), q).unwrap().matrix();
                Connection::Weld {
                    attach,
                    point,
                    dcm: dcm * turn,
                }
            }
            JointKind::Revolute => Connection::Revolute {
                attach,
                point,
                dcm0: dcm,
                axis,
            },
            JointKind::Prismatic => Connection::Prismatic { attach, point, dcm, axis },
        };
        let force = match &j.drive {
            Some(d) => JointForce {
                stiffness: d.stiffness,
                damping: d.damping,
                reference: d.reference,
                actuation: d.profile.as_deref().and_then(|p| config.profile(p)).map(|p| {
                    let f: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |t| p.value(t));
                    f
                }),
            },
            None => JointForce::default(),
        };
        links.push(Link {
            name: j.block_name().to_string(),
            body: LinkBody {
                mass: b.mass,
                com: v3(&b.com),
                inertia: m3(&b.inertia),
            },
            parent,
            connection,
            force,
        });
    }
    let gravity = v3(&config.metadata.gravity);
    let mut loads = Vec::new();
    for e in &config.external_wrenches {
        let link = link_of(&e.body).expect("loads on anchors are not modelled");
        let point = v3(&config.body(&e.body).unwrap().points[&e.point]);
        let (force, torque, frame) = match e.kind {
            ExternalKind::Inertial => (
                e.force.as_ref().map_or(Vec3::zeros(), v3),
                e.torque.as_ref().map_or(Vec3::zeros(), v3),
                LoadFrame::Inertial,
            ),
            ExternalKind::Body => (
                e.force.as_ref().map_or(Vec3::zeros(), v3),
                e.torque.as_ref().map_or(Vec3::zeros(), v3),
                LoadFrame::Link,
            ),
            ExternalKind::Buoyancy => (-config.total_mass() * gravity, Vec3::zeros(), LoadFrame::Inertial),
            ExternalKind::Table => panic!("wrench tables are not modelled"),
        };
        loads.push(Load {
            link,
            point,
            force,
            torque,
            frame,
        });
    }
    MinimalModel::new(links, loads, gravity).unwrap()
}

/// A compiled scenario alongside its oracle model and the engine block of
/// every link.
pub struct Pair {
    pub config: ScenarioConfig,
    pub sys: CompiledSystem,
    pub model: MinimalModel,
    pub blocks: Vec<BlockId>,
}

impl Pair {
    pub fn new(config: ScenarioConfig) -> Self {
        let sys = compile(&config);
        let model = oracle_model(&config);
        let blocks = (0..config.joints.len()).map(|i| BlockId(config.anchors.len() + i)).collect();
        Pair {
            config,
            sys,
            model,
            blocks,
        }
    }

    fn free_link(&self, link: usize) -> bool {
        matches!(self.model.links[link].connection, Connection::Free { .. })
    }

    fn has_dof(&self, link: usize) -> bool {
        matches!(
            self.model.links[link].connection,
            Connection::Revolute { .. } | Connection::Prismatic { .. }
        )
    }

    /// Engine state to oracle coordinates and rates.
    pub fn to_oracle(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.model.dof_count();
        let (mut q, mut qd) = (DVector::zeros(n), DVector::zeros(n));
        for (link, &id) in self.blocks.iter().enumerate() {
            let o = self.model.offset(link);
            if self.free_link(link) {
                let s = self.sys.free_body_state(id, x).unwrap();
                let r = euler_to_dcm(&s.pose.attitude).apply(&s.pose.position);
                q.rows_mut(o, 3).copy_from(&r);
                q.rows_mut(o + 3, 3).copy_from(&s.pose.attitude.angles);
                let (rd, thd) = self
                    .model
                    .free_link_rates(link, &q, &s.twist.linear, &s.twist.angular)
                    .unwrap();
                qd.rows_mut(o, 3).copy_from(&rd);
                qd.rows_mut(o + 3, 3).copy_from(&thd);
            } else if self.has_dof(link) {
                let (a, b) = self.sys.joint_state(id, x).unwrap();
                q[o] = a;
                qd[o] = b;
            }
        }
        (q, qd)
    }

    /// Oracle coordinates and rates to an engine state.
    pub fn to_engine(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        let mut x = self.sys.initial_state();
        let zero = DVector::zeros(q.len());
        for (link, &id) in self.blocks.iter().enumerate() {
            let o = self.model.offset(link);
            if self.free_link(link) {
                let th = EulerAngles::new(Vec3::new(q[o + 3], q[o + 4], q[o + 5]), self.sys.sequence());
                let r = Vec3::new(q[o], q[o + 1], q[o + 2]);
                let ([v, w], _) = self.model.free_link_motion(link, q, qd, &zero).unwrap();
                let frame = FrameId::body(id.0);
                let state = BodyState {
                    twist: Twist::new(v, w, frame),
                    pose: Pose {
                        position: euler_to_dcm(&th).apply_transpose(&r),
                        attitude: th,
                    },
                };
                self.sys.set_free_body_state(id, &mut x, &state).unwrap();
            } else if self.has_dof(link) {
                self.sys.set_joint_state(id, &mut x, q[o], qd[o]).unwrap();
            }
        }
        x
    }

    /// Engine velocity-coordinate accelerations: body-frame `[v̇; ω̇]` of free
    /// bodies, joint accelerations.
    pub fn engine_accel(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        let d = self.sys.derivative(t, x).unwrap();
        let mut a = DVector::zeros(self.model.dof_count());
        for (link, &id) in self.blocks.iter().enumerate() {
            let o = self.model.offset(link);
            let s = self.sys.state_offset(id).unwrap();
            if self.free_link(link) {
                a.rows_mut(o, 6).copy_from(&d.rows(s, 6));
            } else if self.has_dof(link) {
                a[o] = d[s + 1];
            }
        }
        a
    }

    /// Oracle accelerations in the same layout as [`Pair::engine_accel`].
    pub fn oracle_accel(&self, t: f64, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        let qdd = oracle_accel(&self.model, q, qd, t).unwrap();
        let mut a = qdd.clone();
        for link in 0..self.blocks.len() {
            if self.free_link(link) {
                let o = self.model.offset(link);
                let (_, [vd, wd]) = self.model.free_link_motion(link, q, qd, &qdd).unwrap();
                a.rows_mut(o, 3).copy_from(&vd);
                a.rows_mut(o + 3, 3).copy_from(&wd);
            }
        }
        a
    }
}

/// Random oracle coordinates: moderate Euler angles, anything for joints.
pub fn random_state(pair: &Pair, rng: &mut ChaCha8Rng) -> (DVector<f64>, DVector<f64>) {
    let n = pair.model.dof_count();
    let mut q = DVector::zeros(n);
    let mut qd = DVector::zeros(n);
    for (link, l) in pair.model.links.iter().enumerate() {
        let o = pair.model.offset(link);
        match l.connection {
            Connection::Free { .. } => {
                for k in 0..3 {
                    q[o + k] = rng.random_range(-2.0..2.0);
                    q[o + 3 + k] = rng.random_range(-1.0..1.0);
                    qd[o + k] = rng.random_range(-1.0..1.0);
                    qd[o + 3 + k] = rng.random_range(-1.0..1.0);
                }
            }
            Connection::Revolute { .. } => {
                q[o] = rng.random_range(-3.1..3.1);
                qd[o] = rng.random_range(-2.0..2.0);
            }
            Connection::Prismatic { .. } => {
                q[o] = rng.random_range(-0.5..0.5);
                qd[o] = rng.random_range(-1.0..1.0);
            }
            Connection::Weld { .. } => {}
        }
    }
    (q, qd)
}

/// `‖a − b‖∞ / max(‖b‖∞, floor)`.
pub fn relative_inf(a: &DVector<f64>, b: &DVector<f64>, floor: f64) -> f64 {
    (a - b).amax() / b.amax().max(floor)
}
