//! Scenario config to system graph.

use std::collections::HashMap;

use twoport_core::{
    Block, BlockId, DriveLaw, ExternalWrench, FreeBody, LoopClosure, MotionSource, PrismaticJoint, RevoluteJoint,
    SystemGraph, WeldJoint, WrenchSource,
};
use twoport_spatial::{Dcm, EulerAngles, Vec3, Vec6};

use crate::config::{m3, v3, ExternalKind, JointConfig, JointKind, ScenarioConfig, ScenarioErrors, WrenchFrame};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Invalid(#[from] ScenarioErrors),
    #[error("{context}: {source}")]
    Engine {
        context: String,
        source: twoport_core::Error,
    },
}

fn engine(context: impl Into<String>) -> impl FnOnce(twoport_core::Error) -> BuildError {
    let context = context.into();
    move |source| BuildError::Engine { context, source }
}

/// One block per anchor and per joint (each joint block owns its body),
/// wired per the parent declarations, plus external wrenches and closures.
pub fn build_system(config: &ScenarioConfig) -> Result<SystemGraph, BuildError> {
    let issues = config.validate();
    if !issues.is_empty() {
        return Err(ScenarioErrors(issues).into());
    }
    let sequence = config.sequence();
    let mut graph = SystemGraph::new(v3(&config.metadata.gravity), sequence);
    let mut ids: HashMap<&str, BlockId> = HashMap::new();

    for (i, a) in config.anchors.iter().enumerate() {
        let mut src = MotionSource::anchor(&a.name);
        src.position = v3(&a.position);
        for (name, p) in &a.points {
            src = src.with_point(name, v3(p)).map_err(engine(format!("anchors[{i}]")))?;
        }
        ids.insert(&a.name, graph.add(src));
    }

    for (i, j) in config.joints.iter().enumerate() {
        let loc = format!("joints[{i}]");
        let body_cfg = config.body(&j.body).expect("validated");
        let body = config.rigid_body(body_cfg).map_err(engine(&loc))?;
        let block = joint_block(config, j, body).map_err(engine(&loc))?;
        ids.insert(&j.body, graph.add(block));
    }

    for (i, j) in config.joints.iter().enumerate() {
        if let (Some(parent), Some(point)) = (&j.parent, &j.parent_point) {
            graph
                .connect(ids[parent.as_str()], point, ids[j.body.as_str()])
                .map_err(engine(format!("joints[{i}]")))?;
        }
    }

    let total_mass = config.total_mass();
    let gravity = v3(&config.metadata.gravity);
    for (i, e) in config.external_wrenches.iter().enumerate() {
        let loc = format!("external_wrenches[{i}]");
        let force = e.force.as_ref().map_or(Vec3::zeros(), v3);
        let torque = e.torque.as_ref().map_or(Vec3::zeros(), v3);
        let source = match e.kind {
            ExternalKind::Inertial => WrenchSource::Inertial { force, torque },
            ExternalKind::Body => WrenchSource::Body { force, torque },
            ExternalKind::Buoyancy => WrenchSource::Inertial {
                force: -total_mass * gravity,
                torque: Vec3::zeros(),
            },
            ExternalKind::Table => WrenchSource::Table {
                times: e.times.clone().unwrap_or_default(),
                values: e
                    .values
                    .iter()
                    .flatten()
                    .map(|r| Vec6::from_column_slice(r))
                    .collect(),
                inertial: e.frame != Some(WrenchFrame::Body),
            },
        };
        let wrench = ExternalWrench::new(&e.name, &e.point, source).map_err(engine(&loc))?;
        graph.add_external(ids[e.body.as_str()], wrench).map_err(engine(&loc))?;
    }

    for (i, c) in config.loop_closures.iter().enumerate() {
        let loc = format!("loop_closures[{i}]");
        let closure = LoopClosure::new(&c.name, c.stiffness.matrix(), c.damping.matrix()).map_err(engine(&loc))?;
        graph
            .add_loop_closure(
                closure,
                (ids[c.left.body.as_str()], &c.left.point),
                (ids[c.right.body.as_str()], &c.right.point),
            )
            .map_err(engine(&loc))?;
    }
    Ok(graph)
}

fn joint_block(
    config: &ScenarioConfig,
    j: &JointConfig,
    body: twoport_core::RigidBodyParams,
) -> twoport_core::Result<Block> {
    let dcm = match &j.rotation {
        Some(r) => Dcm::from_matrix(m3(r))?,
        None => Dcm::identity(),
    };
    let drive = j.drive.as_ref().map_or_else(DriveLaw::free, |d| {
        let law = DriveLaw::spring_damper(d.stiffness, d.damping).with_reference(d.reference);
        match d.profile.as_deref().and_then(|p| config.profile(p)) {
            Some(p) => law.with_profile(p),
            None => law,
        }
    });
    let axis = j.axis.as_ref().map_or(Vec3::z(), v3);
    let (q, rate) = (j.initial.unwrap_or(0.0), j.rate.unwrap_or(0.0));
    Ok(match j.kind {
        JointKind::Free => {
            let attitude = EulerAngles::new(j.attitude.as_ref().map_or(Vec3::zeros(), v3), config.sequence());
            FreeBody::new(body, &j.point, config.sequence())?
                .with_inertial_pose(j.position.as_ref().map_or(Vec3::zeros(), v3), attitude)?
                .with_twist(
                    j.velocity.as_ref().map_or(Vec3::zeros(), v3),
                    j.angular_velocity.as_ref().map_or(Vec3::zeros(), v3),
                )
                .into()
        }
        JointKind::Weld => WeldJoint::new(body, &j.point, dcm)?.into(),
        JointKind::Revolute => {
            let joint = RevoluteJoint::new(j.block_name(), body, &j.point, axis, dcm)?
                .with_initial(q, rate)
                .with_drive(drive)?;
            if j.locked == Some(true) {
                joint.locked().into()
            } else {
                joint.into()
            }
        }
        JointKind::Prismatic => PrismaticJoint::new(j.block_name(), body, &j.point, axis, dcm)?
            .with_initial(q, rate)
            .with_drive(drive)?
            .into(),
    })
}
