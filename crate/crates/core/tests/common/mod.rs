#![allow(dead_code)]

use twoport_core::*;
use twoport_spatial::{Dcm, EulerSequence};

pub const G: f64 = 9.81;

pub fn gravity() -> Vec3 {
    Vec3::new(0.0, -G, 0.0)
}

/// Point mass hanging `length` below its joint point `P`.
pub fn bob(name: &str, mass: f64, length: f64) -> RigidBodyParams {
    RigidBodyParams::point_mass(name, mass, Vec3::new(0.0, -length, 0.0))
        .unwrap()
        .with_point("P", Vec3::zeros())
        .unwrap()
        .with_point("tip", Vec3::new(0.0, -length, 0.0))
        .unwrap()
}

pub fn anchor() -> MotionSource {
    MotionSource::anchor("ground").with_point("O", Vec3::zeros()).unwrap()
}

pub fn pendulum(length: f64, theta0: f64, gravity: Vec3) -> (CompiledSystem, BlockId) {
    let mut g = SystemGraph::new(gravity, EulerSequence::Zyx);
    let a = g.add(anchor());
    let j = g.add(
        RevoluteJoint::new("theta", bob("bob", 2.0, length), "P", Vec3::z(), Dcm::identity())
            .unwrap()
            .with_initial(theta0, 0.0),
    );
    g.connect(a, "O", j).unwrap();
    (g.assemble().unwrap(), j)
}

pub fn double_pendulum(theta1: f64, theta2: f64, drive: DriveLaw) -> (SystemGraph, BlockId, BlockId) {
    let mut g = SystemGraph::new(gravity(), EulerSequence::Zyx);
    let a = g.add(anchor());
    let j1 = g.add(
        RevoluteJoint::new("p1", bob("m1", 2.0, 1.2), "P", Vec3::z(), Dcm::identity())
            .unwrap()
            .with_initial(theta1, 0.0)
            .with_drive(drive.clone())
            .unwrap(),
    );
    let j2 = g.add(
        RevoluteJoint::new("p2", bob("m2", 3.0, 1.6), "P", Vec3::z(), Dcm::identity())
            .unwrap()
            .with_initial(theta2, 0.0)
            .with_drive(drive)
            .unwrap(),
    );
    g.connect(a, "O", j1).unwrap();
    g.connect(j1, "tip", j2).unwrap();
    (g, j1, j2)
}
