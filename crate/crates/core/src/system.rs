//! System graph, assembly and the per-evaluation fast solve.

use nalgebra::{DMatrix, DVector};
use twoport_spatial::{
    dcm_to_euler, euler_to_dcm, split, stack, tau, Dcm, EulerAngles, EulerSequence, FrameId,
    MotionVector18, Pose, SpatialAccel, Twist,
};

use crate::affine::{Affine6, AffineScalar, FastRows};
use crate::body::{gyroscopic_term, pose_rate, BodyState, DynamicModel, RigidBodyParams};
use crate::external::{ExternalWrench, WrenchSource};
use crate::joints::{
    closure_pose_error, prismatic_increments, revolute_increments, FreeBody, LoopClosure, MotionSource,
    PrismaticJoint, RevoluteJoint, WeldJoint,
};
use crate::{Error, Mat6, Result, Vec3, Vec6};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Free(FreeBody),
    Source(MotionSource),
    Weld(WeldJoint),
    Revolute(RevoluteJoint),
    Prismatic(PrismaticJoint),
}

impl Block {
    pub fn name(&self) -> &str {
        match self {
            Block::Free(b) => &b.body.name,
            Block::Source(s) => &s.name,
            Block::Weld(w) => &w.body.name,
            Block::Revolute(j) => &j.name,
            Block::Prismatic(j) => &j.name,
        }
    }

    pub fn body(&self) -> Option<&RigidBodyParams> {
        match self {
            Block::Free(b) => Some(&b.body),
            Block::Source(_) => None,
            Block::Weld(w) => Some(&w.body),
            Block::Revolute(j) => Some(&j.body),
            Block::Prismatic(j) => Some(&j.body),
        }
    }

    pub fn point(&self, name: &str) -> Result<Vec3> {
        match self {
            Block::Source(s) => s.point(name),
            _ => self.body().expect("body block").point(name),
        }
    }

    /// Point at which the block's motion and wrench equations are written.
    fn reference_point(&self) -> Vec3 {
        let name = match self {
            Block::Free(b) => &b.point,
            Block::Source(_) => return Vec3::zeros(),
            Block::Weld(w) => &w.point,
            Block::Revolute(j) => &j.point,
            Block::Prismatic(j) => &j.point,
        };
        self.point(name).expect("validated on construction")
    }

    fn is_child(&self) -> bool {
        matches!(self, Block::Weld(_) | Block::Revolute(_) | Block::Prismatic(_))
    }

    pub fn slow_len(&self) -> usize {
        match self {
            Block::Free(_) => 12,
            Block::Revolute(_) | Block::Prismatic(_) => 2,
            Block::Source(_) | Block::Weld(_) => 0,
        }
    }

    pub fn fast_len(&self) -> usize {
        match self {
            Block::Free(_) | Block::Weld(_) => 6,
            Block::Revolute(_) | Block::Prismatic(_) => 7,
            Block::Source(_) => 0,
        }
    }
}

#[derive(Debug, Clone)]
struct ClosureSpec {
    closure: LoopClosure,
    left: (usize, String),
    right: (usize, String),
}

/// Blocks wired parent-to-child, plus external wrenches and loop closures.
#[derive(Debug, Clone)]
pub struct SystemGraph {
    gravity: Vec3,
    sequence: EulerSequence,
    blocks: Vec<Block>,
    parents: Vec<Option<(usize, String)>>,
    externals: Vec<(usize, ExternalWrench)>,
    closures: Vec<ClosureSpec>,
}

impl SystemGraph {
    pub fn new(gravity: Vec3, sequence: EulerSequence) -> Self {
        SystemGraph {
            gravity,
            sequence,
            blocks: Vec::new(),
            parents: Vec::new(),
            externals: Vec::new(),
            closures: Vec::new(),
        }
    }

    pub fn add(&mut self, block: impl Into<Block>) -> BlockId {
        self.blocks.push(block.into());
        self.parents.push(None);
        BlockId(self.blocks.len() - 1)
    }

    pub fn block(&self, id: BlockId) -> Result<&Block> {
        self.blocks.get(id.0).ok_or(Error::UnknownBlock(id.0))
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Attach `child`'s joint point to the point `point` of `parent`.
    pub fn connect(&mut self, parent: BlockId, point: &str, child: BlockId) -> Result<()> {
        self.block(parent)?.point(point)?;
        let c = self.block(child)?;
        if !c.is_child() {
            return Err(Error::NotAChild { block: c.name().to_string() });
        }
        if self.parents[child.0].is_some() || parent == child {
            return Err(Error::Cycle { block: c.name().to_string() });
        }
        self.parents[child.0] = Some((parent.0, point.to_string()));
        Ok(())
    }

    pub fn add_external(&mut self, block: BlockId, wrench: ExternalWrench) -> Result<()> {
        let b = self.block(block)?;
        if matches!(b, Block::Source(_)) {
            return Err(Error::InvalidParameter(format!(
                "external wrench `{}` applied to motion source `{}`",
                wrench.name,
                b.name()
            )));
        }
        b.point(&wrench.point)?;
        wrench.source.validate()?;
        self.externals.push((block.0, wrench));
        Ok(())
    }

    pub fn add_loop_closure(&mut self, closure: LoopClosure, left: (BlockId, &str), right: (BlockId, &str)) -> Result<()> {
        self.block(left.0)?.point(left.1)?;
        self.block(right.0)?.point(right.1)?;
        self.closures.push(ClosureSpec {
            closure,
            left: (left.0 .0, left.1.to_string()),
            right: (right.0 .0, right.1.to_string()),
        });
        Ok(())
    }

    pub fn assemble(&self) -> Result<CompiledSystem> {
        if !self.blocks.iter().any(|b| matches!(b, Block::Free(_) | Block::Source(_))) {
            let what = match self.blocks.first() {
                None => "the system has no blocks".to_string(),
                Some(b) => format!("no free body or anchor; chain at `{}` cannot be driven", b.name()),
            };
            return Err(Error::NoDynamicTerminal(what));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::InvalidParameter("gravity is not finite".into()));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.is_child() && self.parents[i].is_none() {
                return Err(Error::DanglingPort { block: b.name().to_string() });
            }
        }

        let n = self.blocks.len();
        let mut children: Vec<Vec<(usize, Vec3)>> = vec![Vec::new(); n];
        for (i, p) in self.parents.iter().enumerate() {
            if let Some((parent, point)) = p {
                let coords = self.blocks[*parent].point(point)?;
                children[*parent].push((i, coords));
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut stack: Vec<usize> = (0..n).filter(|i| !self.blocks[*i].is_child()).rev().collect();
        while let Some(i) = stack.pop() {
            order.push(i);
            for (c, _) in children[i].iter().rev() {
                stack.push(*c);
            }
        }
        if order.len() != n {
            let stray = (0..n).find(|i| !order.contains(i)).expect("unvisited block");
            return Err(Error::Cycle {
                block: self.blocks[stray].name().to_string(),
            });
        }

        let mut nodes = Vec::with_capacity(n);
        let (mut slow, mut fast) = (0, 0);
        for (i, block) in self.blocks.iter().enumerate() {
            let model = block.body().map(|b| b.dynamic_model_at(&block.reference_point()));
            if let (Block::Free(f), Some(d)) = (block, &model) {
                d.inverse(&f.body.name)?;
                f.initial.pose.attitude.check_chart()?;
            }
            let parent = match &self.parents[i] {
                Some((p, point)) => Some((*p, self.blocks[*p].point(point)?)),
                None => None,
            };
            nodes.push(Node {
                block: block.clone(),
                reference: block.reference_point(),
                parent,
                children: children[i].clone(),
                model,
                slow,
                fast,
            });
            slow += block.slow_len();
            fast += block.fast_len();
        }
        for node in &nodes {
            if let Block::Free(f) = &node.block {
                if f.initial.pose.attitude.sequence != self.sequence {
                    return Err(Error::InvalidParameter(format!(
                        "free body `{}` uses Euler sequence {} but the system uses {}",
                        f.body.name, f.initial.pose.attitude.sequence, self.sequence
                    )));
                }
            }
        }

        let externals = self
            .externals
            .iter()
            .map(|(i, w)| {
                Ok(CompiledExternal {
                    node: *i,
                    point: self.blocks[*i].point(&w.point)?,
                    wrench: w.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let closures = self
            .closures
            .iter()
            .map(|c| {
                Ok(CompiledClosure {
                    closure: c.closure.clone(),
                    left: (c.left.0, self.blocks[c.left.0].point(&c.left.1)?),
                    right: (c.right.0, self.blocks[c.right.0].point(&c.right.1)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(CompiledSystem {
            gravity: self.gravity,
            sequence: self.sequence,
            nodes,
            order,
            externals,
            closures,
            slow_len: slow,
            fast_len: fast,
        })
    }
}

macro_rules! block_from {
    ($($ty:ty => $variant:ident),*) => {
        $(impl From<$ty> for Block {
            fn from(b: $ty) -> Block {
                Block::$variant(b)
            }
        })*
    };
}

block_from!(FreeBody => Free, MotionSource => Source, WeldJoint => Weld, RevoluteJoint => Revolute, PrismaticJoint => Prismatic);

#[derive(Debug, Clone)]
struct Node {
    block: Block,
    reference: Vec3,
    parent: Option<(usize, Vec3)>,
    children: Vec<(usize, Vec3)>,
    model: Option<DynamicModel>,
    slow: usize,
    fast: usize,
}

#[derive(Debug, Clone)]
struct CompiledExternal {
    node: usize,
    point: Vec3,
    wrench: ExternalWrench,
}

#[derive(Debug, Clone)]
struct CompiledClosure {
    closure: LoopClosure,
    left: (usize, Vec3),
    right: (usize, Vec3),
}

/// Slow-state kinematics of a block at its reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockKinematics {
    /// Twist at the reference point, in the block frame.
    pub twist: Vec6,
    /// Inertial position of the reference point.
    pub position: Vec3,
    /// `P_{a/i}`.
    pub attitude: Dcm,
    /// Joint coordinate and rate (zero for non-joint blocks).
    pub q: f64,
    pub rate: f64,
    /// Maps the parent twist at its reference point to this block's frame and
    /// reference point, joint motion excluded. Its transpose brings this
    /// block's parent wrench back to the parent.
    transport: Mat6,
    /// Velocity-dependent spatial-acceleration term of the joint.
    bias: Vec6,
}

impl BlockKinematics {
    fn at_point(&self, reference: &Vec3, point: &Vec3) -> (Vec3, Vec6) {
        let position = self.position + self.attitude.apply(&(point - reference));
        (position, tau(&(reference - point)).matrix() * self.twist)
    }
}

/// Results of the joint part of an evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEvaluation {
    pub q: f64,
    pub rate: f64,
    pub accel: f64,
    /// Drive force/torque; for a locked joint, the reaction holding it.
    pub drive: f64,
    /// Wrench applied by the child on its parent at the joint point, in the
    /// child frame.
    pub wrench: Vec6,
    /// The same wrench at the parent's attachment point, in the parent frame.
    pub wrench_to_parent: Vec6,
    /// Joint direction `[0; r]` or `[t; 0]` in the child frame (zero for welds).
    pub direction: Vec6,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockEvaluation {
    pub kinematics: BlockKinematics,
    /// Spatial acceleration at the reference point.
    pub accel: Vec6,
    /// Total wrench from children, external sources and closures, at the
    /// reference point.
    pub applied: Vec6,
    pub joint: Option<JointEvaluation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub time: f64,
    pub blocks: Vec<BlockEvaluation>,
    /// Closure wrenches on the left ends, in their frames at their points.
    pub closure_wrenches: Vec<Vec6>,
    /// `‖A f + c‖∞` after the solve.
    pub residual: f64,
    pub derivative: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyTerms {
    pub kinetic: f64,
    pub gravity: f64,
    pub springs: f64,
    pub closures: f64,
    pub external: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.kinetic + self.gravity + self.springs + self.closures + self.external
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerTerms {
    /// Power dissipated by dampers (non-negative).
    pub dissipation: f64,
    /// Power injected by drive profiles and non-conservative external wrenches.
    pub actuation: f64,
}

/// Assembled system: state layout, fast-unknown layout and evaluators.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    gravity: Vec3,
    sequence: EulerSequence,
    nodes: Vec<Node>,
    order: Vec<usize>,
    externals: Vec<CompiledExternal>,
    closures: Vec<CompiledClosure>,
    slow_len: usize,
    fast_len: usize,
}

impl CompiledSystem {
    pub fn state_len(&self) -> usize {
        self.slow_len
    }

    pub fn fast_len(&self) -> usize {
        self.fast_len
    }

    pub fn gravity(&self) -> &Vec3 {
        &self.gravity
    }

    pub fn sequence(&self) -> EulerSequence {
        self.sequence
    }

    pub fn block_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn block(&self, id: BlockId) -> Result<&Block> {
        self.nodes.get(id.0).map(|n| &n.block).ok_or(Error::UnknownBlock(id.0))
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.nodes.iter().position(|n| n.block.name() == name).map(BlockId)
    }

    pub fn state_offset(&self, id: BlockId) -> Result<usize> {
        self.nodes.get(id.0).map(|n| n.slow).ok_or(Error::UnknownBlock(id.0))
    }

    pub fn initial_state(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.slow_len);
        for node in &self.nodes {
            let o = node.slow;
            match &node.block {
                Block::Free(f) => {
                    let mut buf = [0.0; 12];
                    f.initial.to_slice(&mut buf);
                    x.rows_mut(o, 12).copy_from_slice(&buf);
                }
                Block::Revolute(j) => {
                    x[o] = j.theta0;
                    x[o + 1] = if j.locked { 0.0 } else { j.rate0 };
                }
                Block::Prismatic(j) => {
                    x[o] = j.x0;
                    x[o + 1] = j.rate0;
                }
                Block::Source(_) | Block::Weld(_) => {}
            }
        }
        x
    }

    pub fn state_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.slow_len);
        for node in &self.nodes {
            let n = node.block.name();
            match &node.block {
                Block::Free(_) => {
                    for s in ["vx", "vy", "vz", "wx", "wy", "wz", "px", "py", "pz", "phi", "theta", "psi"] {
                        names.push(format!("{n}.{s}"));
                    }
                }
                Block::Revolute(_) | Block::Prismatic(_) => {
                    names.push(n.to_string());
                    names.push(format!("{n}.rate"));
                }
                _ => {}
            }
        }
        names
    }

    pub fn free_body_state(&self, id: BlockId, x: &DVector<f64>) -> Result<BodyState> {
        let node = self.nodes.get(id.0).ok_or(Error::UnknownBlock(id.0))?;
        match &node.block {
            Block::Free(_) => Ok(read_body_state(x, node.slow, FrameId::body(id.0), self.sequence)),
            b => Err(Error::InvalidParameter(format!("block `{}` is not a free body", b.name()))),
        }
    }

    pub fn set_free_body_state(&self, id: BlockId, x: &mut DVector<f64>, state: &BodyState) -> Result<()> {
        let node = self.nodes.get(id.0).ok_or(Error::UnknownBlock(id.0))?;
        match &node.block {
            Block::Free(_) => {
                let mut buf = [0.0; 12];
                state.to_slice(&mut buf);
                x.rows_mut(node.slow, 12).copy_from_slice(&buf);
                Ok(())
            }
            b => Err(Error::InvalidParameter(format!("block `{}` is not a free body", b.name()))),
        }
    }

    pub fn joint_state(&self, id: BlockId, x: &DVector<f64>) -> Result<(f64, f64)> {
        let node = self.nodes.get(id.0).ok_or(Error::UnknownBlock(id.0))?;
        match &node.block {
            Block::Revolute(_) | Block::Prismatic(_) => Ok((x[node.slow], x[node.slow + 1])),
            b => Err(Error::InvalidParameter(format!("block `{}` is not a joint", b.name()))),
        }
    }

    pub fn set_joint_state(&self, id: BlockId, x: &mut DVector<f64>, q: f64, rate: f64) -> Result<()> {
        let node = self.nodes.get(id.0).ok_or(Error::UnknownBlock(id.0))?;
        match &node.block {
            Block::Revolute(_) | Block::Prismatic(_) => {
                x[node.slow] = q;
                x[node.slow + 1] = rate;
                Ok(())
            }
            b => Err(Error::InvalidParameter(format!("block `{}` is not a joint", b.name()))),
        }
    }

    fn check_len(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.slow_len {
            return Err(Error::StateLength {
                expected: self.slow_len,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Positions, attitudes and twists of every block from the slow state.
    pub fn kinematics(&self, x: &DVector<f64>) -> Result<Vec<BlockKinematics>> {
        self.check_len(x)?;
        let mut kin: Vec<Option<BlockKinematics>> = vec![None; self.nodes.len()];
        for &i in &self.order {
            let node = &self.nodes[i];
            let k = match &node.block {
                Block::Source(s) => BlockKinematics {
                    twist: s.twist,
                    position: s.position,
                    attitude: s.attitude,
                    q: 0.0,
                    rate: 0.0,
                    transport: Mat6::identity(),
                    bias: Vec6::zeros(),
                },
                Block::Free(_) => {
                    let st = read_body_state(x, node.slow, FrameId::body(i), self.sequence);
                    let attitude = euler_to_dcm(&st.pose.attitude);
                    BlockKinematics {
                        twist: st.twist.to_vector(),
                        position: attitude.apply(&st.pose.position),
                        attitude,
                        q: 0.0,
                        rate: 0.0,
                        transport: Mat6::identity(),
                        bias: Vec6::zeros(),
                    }
                }
                joint => {
                    let (p, attach) = node.parent.expect("child blocks have parents");
                    let pk = kin[p].as_ref().expect("parents precede children");
                    let parent_ref = self.nodes[p].reference;
                    let position = pk.position + pk.attitude.apply(&(attach - parent_ref));
                    let (q, rate) = match joint {
                        Block::Revolute(j) if j.locked => (x[node.slow], 0.0),
                        Block::Weld(_) => (0.0, 0.0),
                        _ => (x[node.slow], x[node.slow + 1]),
                    };
                    let p_ab = match joint {
                        Block::Weld(w) => w.dcm,
                        Block::Revolute(j) => j.dcm(q),
                        Block::Prismatic(j) => j.dcm,
                        _ => unreachable!(),
                    };
                    let to_child = Dcm::transpose(&p_ab).augmented_dual() * tau(&(parent_ref - attach)).matrix();
                    let parent_twist = to_child * pk.twist;
                    let attitude = pk.attitude.compose(&p_ab);
                    match joint {
                        Block::Weld(_) => BlockKinematics {
                            twist: parent_twist,
                            position,
                            attitude,
                            q,
                            rate,
                            transport: to_child,
                            bias: Vec6::zeros(),
                        },
                        Block::Revolute(j) => {
                            let (bias, inc) = revolute_increments(&j.axis, rate, &parent_twist);
                            BlockKinematics {
                                twist: parent_twist + inc,
                                position,
                                attitude,
                                q,
                                rate,
                                transport: to_child,
                                bias,
                            }
                        }
                        Block::Prismatic(j) => {
                            let (offset, bias, inc) = prismatic_increments(&j.axis, q, rate, &parent_twist);
                            let shift = tau(&offset).matrix();
                            BlockKinematics {
                                twist: shift * parent_twist + inc,
                                position: position - attitude.apply(&offset),
                                attitude,
                                q,
                                rate,
                                transport: shift * to_child,
                                bias,
                            }
                        }
                        _ => unreachable!(),
                    }
                }
            };
            kin[i] = Some(k);
        }
        Ok(kin.into_iter().map(|k| k.expect("all blocks visited")).collect())
    }

    fn closure_terms(&self, c: &CompiledClosure, kin: &[BlockKinematics]) -> Result<(Vec6, Vec6)> {
        let (l, r) = (&kin[c.left.0], &kin[c.right.0]);
        let (pl, tl) = l.at_point(&self.nodes[c.left.0].reference, &c.left.1);
        let (pr, tr) = r.at_point(&self.nodes[c.right.0].reference, &c.right.1);
        let dpose = closure_pose_error(&c.closure.name, (&pl, &l.attitude), (&pr, &r.attitude), self.sequence)?;
        let rel = l.attitude.transpose().compose(&r.attitude);
        let dtwist = rel.augmented_dual() * tr - tl;
        Ok((dpose, dtwist))
    }

    /// Constant part of the applied wrench of every block: external sources and
    /// closures, moved to the reference points.
    fn source_wrenches(&self, t: f64, kin: &[BlockKinematics]) -> Result<(Vec<Vec6>, Vec<Vec6>)> {
        let mut applied = vec![Vec6::zeros(); self.nodes.len()];
        for e in &self.externals {
            let (w, inertial) = e.wrench.source.value(t);
            let w = if inertial {
                kin[e.node].attitude.transpose().augmented_dual() * w
            } else {
                w
            };
            applied[e.node] += tau(&(self.nodes[e.node].reference - e.point)).matrix().transpose() * w;
        }
        let mut closure_wrenches = Vec::with_capacity(self.closures.len());
        for c in &self.closures {
            let (dpose, dtwist) = self.closure_terms(c, kin)?;
            let w = c.closure.wrench(&dpose, &dtwist);
            let (l, r) = (c.left.0, c.right.0);
            if self.nodes[l].model.is_some() {
                applied[l] += tau(&(self.nodes[l].reference - c.left.1)).matrix().transpose() * w;
            }
            if self.nodes[r].model.is_some() {
                let rel = kin[r].attitude.transpose().compose(&kin[l].attitude);
                let wr = -(rel.augmented_dual() * w);
                applied[r] += tau(&(self.nodes[r].reference - c.right.1)).matrix().transpose() * wr;
            }
            closure_wrenches.push(w);
        }
        Ok((applied, closure_wrenches))
    }

    fn build_rows(&self, t: f64, kin: &[BlockKinematics]) -> Result<(FastRows, Vec<Affine6>, Vec<Affine6>, Vec<Vec6>)> {
        let n = self.fast_len;
        let mut accel: Vec<Option<Affine6>> = vec![None; self.nodes.len()];
        for &i in &self.order {
            let node = &self.nodes[i];
            let k = &kin[i];
            let a = match &node.block {
                Block::Source(s) => Affine6::constant(s.accel, n),
                Block::Free(_) => Affine6::unknowns(node.fast, n),
                joint => {
                    let (p, _) = node.parent.expect("child blocks have parents");
                    let mut a = accel[p].as_ref().expect("parents precede children").premul(&k.transport);
                    a.add_constant(&k.bias);
                    match joint {
                        Block::Revolute(j) if !j.locked => {
                            a.add_column(node.fast + 6, &stack(&Vec3::zeros(), &j.axis));
                        }
                        Block::Prismatic(j) => a.add_column(node.fast + 6, &stack(&j.axis, &Vec3::zeros())),
                        _ => {}
                    }
                    a
                }
            };
            accel[i] = Some(a);
        }
        let accel: Vec<Affine6> = accel.into_iter().map(|a| a.expect("all blocks visited")).collect();

        let (constants, closure_wrenches) = self.source_wrenches(t, kin)?;
        let mut applied: Vec<Affine6> = constants.iter().map(|c| Affine6::constant(*c, n)).collect();
        for (i, node) in self.nodes.iter().enumerate() {
            for (c, _) in &node.children {
                let back = kin[*c].transport.transpose();
                let w = Affine6::unknowns(self.nodes[*c].fast, n).premul(&back);
                applied[i] += &w;
            }
        }

        let mut rows = FastRows::new(n);
        for (i, node) in self.nodes.iter().enumerate() {
            let Some(d) = &node.model else { continue };
            let k = &kin[i];
            let g = stack(&k.attitude.apply_transpose(&self.gravity), &Vec3::zeros());
            let mut eq = &accel[i].premul(d.matrix()) - &applied[i];
            eq.add_constant(&(gyroscopic_term(d, &k.twist) - d.matrix() * g));
            match &node.block {
                Block::Free(_) => rows.push6(&eq),
                joint => {
                    eq += &Affine6::unknowns(node.fast, n);
                    rows.push6(&eq);
                    let (s, u, locked) = match joint {
                        Block::Revolute(j) => (
                            stack(&Vec3::zeros(), &j.axis),
                            j.drive.output(k.q, k.rate, t),
                            j.locked,
                        ),
                        Block::Prismatic(j) => (stack(&j.axis, &Vec3::zeros()), j.drive.output(k.q, k.rate, t), false),
                        _ => continue,
                    };
                    let mut dof = AffineScalar::constant(if locked { 0.0 } else { u }, n);
                    for r in 0..6 {
                        dof.add_column(node.fast + r, s[r]);
                    }
                    if locked {
                        dof.add_column(node.fast + 6, 1.0);
                    }
                    rows.push1(&dof);
                }
            }
        }
        debug_assert_eq!(rows.len(), n);
        Ok((rows, accel, applied, closure_wrenches))
    }

    fn solve(&self, rows: &FastRows) -> Result<DVector<f64>> {
        if self.fast_len == 0 {
            return Ok(DVector::zeros(0));
        }
        let lu = rows.lin.clone().lu();
        let u = lu.u();
        let diag = u.diagonal().map(f64::abs);
        let scale = rows.lin.amax().max(f64::MIN_POSITIVE);
        if diag.min() <= 1e-13 * scale {
            return Err(self.diagnose_singular(&rows.lin));
        }
        lu.solve(&(-&rows.cst)).ok_or_else(|| self.diagnose_singular(&rows.lin))
    }

    fn diagnose_singular(&self, a: &DMatrix<f64>) -> Error {
        let lu = a.clone().full_piv_lu();
        let diag = lu.u().diagonal().map(f64::abs);
        let k = diag.imin();
        let mut columns = nalgebra::RowDVector::from_fn(a.ncols(), |_, j| j as f64);
        lu.q().permute_columns(&mut columns);
        let col = columns[k] as usize;
        let block = self
            .nodes
            .iter()
            .rev()
            .find(|n| n.block.fast_len() > 0 && n.fast <= col)
            .map_or("?", |n| n.block.name());
        Error::SingularFastSystem { block: block.to_string() }
    }

    /// Solve the interconnection system and return every block's motion,
    /// wrenches and the slow-state derivative.
    pub fn evaluate(&self, t: f64, x: &DVector<f64>) -> Result<Evaluation> {
        let kin = self.kinematics(x)?;
        let (rows, accel, applied, closure_wrenches) = self.build_rows(t, &kin)?;
        let f = self.solve(&rows)?;
        let residual = if self.fast_len == 0 {
            0.0
        } else {
            (&rows.lin * &f + &rows.cst).amax()
        };

        let mut dx = DVector::zeros(self.slow_len);
        let mut blocks = Vec::with_capacity(self.nodes.len());
        for (i, (node, k)) in self.nodes.iter().zip(kin).enumerate() {
            let a = accel[i].eval(&f);
            let joint = match &node.block {
                Block::Free(_) => {
                    let st = read_body_state(x, node.slow, FrameId::body(i), self.sequence);
                    let (dp, dth) = pose_rate(&st.twist, &st.pose)?;
                    dx.rows_mut(node.slow, 6).copy_from(&a);
                    dx.rows_mut(node.slow + 6, 3).copy_from(&dp);
                    dx.rows_mut(node.slow + 9, 3).copy_from(&dth);
                    None
                }
                Block::Source(_) => None,
                joint => {
                    let w: Vec6 = f.fixed_rows::<6>(node.fast).into_owned();
                    let (direction, accel, drive) = match joint {
                        Block::Revolute(j) if j.locked => (stack(&Vec3::zeros(), &j.axis), 0.0, f[node.fast + 6]),
                        Block::Revolute(j) => (
                            stack(&Vec3::zeros(), &j.axis),
                            f[node.fast + 6],
                            j.drive.output(k.q, k.rate, t),
                        ),
                        Block::Prismatic(j) => (
                            stack(&j.axis, &Vec3::zeros()),
                            f[node.fast + 6],
                            j.drive.output(k.q, k.rate, t),
                        ),
                        _ => (Vec6::zeros(), 0.0, 0.0),
                    };
                    if joint.slow_len() == 2 {
                        dx[node.slow] = k.rate;
                        dx[node.slow + 1] = accel;
                    }
                    let (p, attach) = node.parent.expect("child blocks have parents");
                    let undo = tau(&(attach - self.nodes[p].reference)).matrix().transpose();
                    let wrench_to_parent = undo * k.transport.transpose() * w;
                    Some(JointEvaluation {
                        q: k.q,
                        rate: k.rate,
                        accel,
                        drive,
                        wrench: w,
                        wrench_to_parent,
                        direction,
                    })
                }
            };
            blocks.push(BlockEvaluation {
                kinematics: k,
                accel: a,
                applied: applied[i].eval(&f),
                joint,
            });
        }
        Ok(Evaluation {
            time: t,
            blocks,
            closure_wrenches,
            residual,
            derivative: dx,
        })
    }

    pub fn derivative(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.evaluate(t, x)?.derivative)
    }

    /// Error if a free body's middle Euler angle crossed the chart
    /// singularity between two states (a step can jump over the tolerance
    /// band without landing in it).
    pub fn check_chart_crossing(&self, from: &DVector<f64>, to: &DVector<f64>) -> Result<()> {
        for node in &self.nodes {
            if let Block::Free(_) = node.block {
                let j = node.slow + 9 + self.sequence.middle_axis();
                if from[j].cos().signum() != to[j].cos().signum() {
                    return Err(twoport_spatial::SpatialError::GimbalSingularity {
                        angle: to[j],
                        tolerance: twoport_spatial::SINGULARITY_TOLERANCE,
                    }
                    .into());
                }
            }
        }
        Ok(())
    }

    /// Which state entries are velocities (twists and joint rates).
    pub fn velocity_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.slow_len];
        for node in &self.nodes {
            match node.block {
                Block::Free(_) => mask[node.slow..node.slow + 6].iter_mut().for_each(|m| *m = true),
                Block::Revolute(_) | Block::Prismatic(_) => mask[node.slow + 1] = true,
                _ => {}
            }
        }
        mask
    }

    /// Rates of the position-like states from the velocities held in `x`;
    /// velocity entries are zero.
    pub fn position_rates(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x)?;
        let mut dx = DVector::zeros(self.slow_len);
        for (i, node) in self.nodes.iter().enumerate() {
            match &node.block {
                Block::Free(_) => {
                    let st = read_body_state(x, node.slow, FrameId::body(i), self.sequence);
                    let (dp, dth) = pose_rate(&st.twist, &st.pose)?;
                    dx.rows_mut(node.slow + 6, 3).copy_from(&dp);
                    dx.rows_mut(node.slow + 9, 3).copy_from(&dth);
                }
                Block::Revolute(j) if j.locked => {}
                Block::Revolute(_) | Block::Prismatic(_) => dx[node.slow] = x[node.slow + 1],
                _ => {}
            }
        }
        Ok(dx)
    }

    /// Motion vector of a block at one of its points, in the block frame.
    pub fn motion_at(&self, eval: &Evaluation, id: BlockId, point: &str) -> Result<MotionVector18> {
        let node = self.nodes.get(id.0).ok_or(Error::UnknownBlock(id.0))?;
        let b = &eval.blocks[id.0];
        let c = node.block.point(point)?;
        let (position, twist) = b.kinematics.at_point(&node.reference, &c);
        let accel = tau(&(node.reference - c)).matrix() * b.accel;
        let frame = FrameId::body(id.0);
        Ok(MotionVector18 {
            accel: SpatialAccel::from_vector(&accel, frame),
            twist: Twist::from_vector(&twist, frame),
            pose: Pose {
                position: b.kinematics.attitude.apply_transpose(&position),
                attitude: dcm_to_euler(&b.kinematics.attitude, self.sequence)?,
            },
        })
    }

    /// Generalized mass matrix in the velocity coordinates (free-body twists
    /// and unlocked joint rates), extracted by unit-force probing of the fast
    /// system.
    pub fn mass_matrix(&self, t: f64, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let kin = self.kinematics(x)?;
        let (rows, _, _, _) = self.build_rows(t, &kin)?;
        let lu = rows.lin.clone().lu();
        // (row of the generalized force, column of the matching acceleration, sign)
        // rows are pushed block by block, so each block's rows start at its
        // fast offset
        let mut coords = Vec::new();
        for node in &self.nodes {
            match &node.block {
                Block::Free(_) => {
                    for r in 0..6 {
                        coords.push((node.fast + r, node.fast + r, -1.0));
                    }
                }
                Block::Revolute(j) if !j.locked => coords.push((node.fast + 6, node.fast + 6, 1.0)),
                Block::Prismatic(_) => coords.push((node.fast + 6, node.fast + 6, 1.0)),
                _ => {}
            }
        }
        let m = coords.len();
        let mut inv = DMatrix::zeros(m, m);
        for (c, &(r, _, sign)) in coords.iter().enumerate() {
            let mut rhs = DVector::zeros(self.fast_len);
            rhs[r] = -sign;
            let f = lu.solve(&rhs).ok_or_else(|| self.diagnose_singular(&rows.lin))?;
            for (k, &(_, col, _)) in coords.iter().enumerate() {
                inv[(k, c)] = f[col];
            }
        }
        inv.try_inverse().ok_or(Error::SingularFastSystem {
            block: "mass matrix".into(),
        })
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for node in &self.nodes {
            let n = node.block.name();
            match node.block {
                Block::Free(_) => {
                    for s in ["x", "y", "z", "phi", "theta", "psi"] {
                        names.push(format!("{n}.{s}"));
                    }
                }
                Block::Revolute(_) | Block::Prismatic(_) => names.push(n.to_string()),
                _ => {}
            }
        }
        names
    }

    /// Inertial positions and Euler angles of free bodies, joint coordinates.
    pub fn outputs(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let mut out = Vec::new();
        for node in &self.nodes {
            let o = node.slow;
            match node.block {
                Block::Free(_) => {
                    let th = EulerAngles::new(x.fixed_rows::<3>(o + 9).into_owned(), self.sequence);
                    let p = euler_to_dcm(&th).apply(&x.fixed_rows::<3>(o + 6).into_owned());
                    out.extend_from_slice(p.as_slice());
                    out.extend_from_slice(th.angles.as_slice());
                }
                Block::Revolute(_) | Block::Prismatic(_) => out.push(x[o]),
                _ => {}
            }
        }
        Ok(out)
    }

    pub fn energy(&self, t: f64, x: &DVector<f64>) -> Result<EnergyTerms> {
        let kin = self.kinematics(x)?;
        let mut e = EnergyTerms::default();
        for (node, k) in self.nodes.iter().zip(&kin) {
            if let (Some(d), Some(body)) = (&node.model, node.block.body()) {
                e.kinetic += d.kinetic_energy(&k.twist);
                let com = k.position + k.attitude.apply(&(body.com - node.reference));
                e.gravity -= body.mass * self.gravity.dot(&com);
            }
            match &node.block {
                Block::Revolute(j) if !j.locked => e.springs += j.drive.potential(k.q),
                Block::Prismatic(j) => e.springs += j.drive.potential(k.q),
                _ => {}
            }
        }
        for c in &self.closures {
            let (dpose, _) = self.closure_terms(c, &kin)?;
            e.closures += 0.5 * dpose.dot(&(c.closure.stiffness * dpose));
        }
        for ext in &self.externals {
            if let Some(force) = ext.wrench.source.conservative_force() {
                let (r, _) = kin[ext.node].at_point(&self.nodes[ext.node].reference, &ext.point);
                e.external -= force.dot(&r);
            }
        }
        let _ = t;
        Ok(e)
    }

    pub fn power(&self, t: f64, x: &DVector<f64>) -> Result<PowerTerms> {
        let kin = self.kinematics(x)?;
        let mut p = PowerTerms::default();
        for (node, k) in self.nodes.iter().zip(&kin) {
            match &node.block {
                Block::Revolute(j) if !j.locked => {
                    p.dissipation += j.drive.dissipation(k.rate);
                    p.actuation += j.drive.actuation(t) * k.rate;
                }
                Block::Prismatic(j) => {
                    p.dissipation += j.drive.dissipation(k.rate);
                    p.actuation += j.drive.actuation(t) * k.rate;
                }
                _ => {}
            }
        }
        for c in &self.closures {
            let (_, dtwist) = self.closure_terms(c, &kin)?;
            p.dissipation += dtwist.dot(&(c.closure.damping * dtwist));
        }
        for ext in &self.externals {
            let k = &kin[ext.node];
            let (_, twist) = k.at_point(&self.nodes[ext.node].reference, &ext.point);
            let (w, inertial) = ext.wrench.source.value(t);
            let w = if inertial {
                k.attitude.transpose().augmented_dual() * w
            } else {
                w
            };
            let (v, omega) = split(&twist);
            let (force, torque) = split(&w);
            p.actuation += match ext.wrench.source {
                WrenchSource::Inertial { .. } => torque.dot(&omega),
                _ => force.dot(&v) + torque.dot(&omega),
            };
        }
        Ok(p)
    }

    /// Total linear momentum and angular momentum about the inertial origin,
    /// both in the inertial frame.
    pub fn momentum(&self, x: &DVector<f64>) -> Result<(Vec3, Vec3)> {
        let kin = self.kinematics(x)?;
        let (mut lin, mut ang) = (Vec3::zeros(), Vec3::zeros());
        for (node, k) in self.nodes.iter().zip(&kin) {
            let Some(body) = node.block.body() else { continue };
            let (v, w) = split(&k.twist);
            let bc = body.com - node.reference;
            let p = k.attitude.apply(&(body.mass * (v + w.cross(&bc))));
            let r = k.position + k.attitude.apply(&bc);
            lin += p;
            ang += r.cross(&p) + k.attitude.apply(&(body.inertia * w));
        }
        Ok((lin, ang))
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().filter_map(|n| n.block.body()).map(|b| b.mass).sum()
    }
}

fn read_body_state(x: &DVector<f64>, o: usize, frame: FrameId, sequence: EulerSequence) -> BodyState {
    let v = |k: usize| Vec3::new(x[o + k], x[o + k + 1], x[o + k + 2]);
    BodyState {
        twist: Twist::new(v(0), v(3), frame),
        pose: Pose {
            position: v(6),
            attitude: EulerAngles::new(v(9), sequence),
        },
    }
}
