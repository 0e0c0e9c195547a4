//! Scenario file schema, parsing and validation.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use twoport_core::{LoopClosure, Profile, RigidBodyParams, Scheme};
use twoport_spatial::{Dcm, EulerAngles, EulerSequence, Mat3, Mat6, Vec3};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub metadata: Metadata,
    #[serde(default)]
    pub integration: Integration,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub anchors: Vec<AnchorConfig>,
    #[serde(default)]
    pub bodies: Vec<BodyConfig>,
    #[serde(default)]
    pub joints: Vec<JointConfig>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, ProfileConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub external_wrenches: Vec<ExternalConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loop_closures: Vec<ClosureConfig>,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Inertial frame, m/s².
    pub gravity: [f64; 3],
    #[serde(default = "default_sequence")]
    pub euler_sequence: String,
}

fn default_sequence() -> String {
    EulerSequence::Zyx.name().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Integration {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_scheme")]
    pub scheme: String,
}

fn default_scheme() -> String {
    Scheme::Rk4.name().to_string()
}

impl Default for Integration {
    fn default() -> Self {
        Integration {
            dt: 1e-3,
            t_final: 1.0,
            scheme: default_scheme(),
        }
    }
}

/// Fixed frame parallel to the inertial axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    pub name: String,
    #[serde(default)]
    pub position: [f64; 3],
    #[serde(default)]
    pub points: BTreeMap<String, [f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyConfig {
    pub name: String,
    pub mass: f64,
    #[serde(default)]
    pub com: [f64; 3],
    /// About the centre of mass, body axes.
    #[serde(default)]
    pub inertia: [[f64; 3]; 3],
    #[serde(default)]
    pub points: BTreeMap<String, [f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Free,
    Weld,
    Revolute,
    Prismatic,
}

impl fmt::Display for JointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JointKind::Free => "free",
            JointKind::Weld => "weld",
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
        })
    }
}

/// Attachment of `body` at its point `point`. Free joints carry the initial
/// inertial pose and body-frame twist of that point; the others hang the
/// body on `parent_point` of `parent` (a body or an anchor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    #[serde(rename = "type")]
    pub kind: JointKind,
    /// Output name of one-DOF joints; defaults to the body name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub body: String,
    pub point: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_point: Option<String>,
    /// Child axes expressed in parent axes (`[v]_parent = R [v]_child`), at
    /// zero joint angle for revolutes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[[f64; 3]; 3]>,
    /// Joint axis in body axes; normalized on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locked: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    /// Euler angles stored by axis, rad.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attitude: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_velocity: Option<[f64; 3]>,
}

impl JointConfig {
    /// Block name used for outputs and lookups.
    pub fn block_name(&self) -> &str {
        match self.kind {
            JointKind::Revolute | JointKind::Prismatic => self.name.as_deref().unwrap_or(&self.body),
            _ => &self.body,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct DriveConfig {
    #[serde(default)]
    pub stiffness: f64,
    #[serde(default)]
    pub damping: f64,
    #[serde(default)]
    pub reference: f64,
    /// Name of an entry of `profiles`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    Constant,
    Sine,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub kind: ProfileKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Hz.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalKind {
    /// Constant force and torque in inertial axes.
    Inertial,
    /// Constant force and torque in body axes.
    Body,
    /// Piecewise-linear `[F; T]` rows.
    Table,
    /// `−m g` with `m` the total mass of the scenario, inertial axes.
    Buoyancy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrenchFrame {
    Inertial,
    Body,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub name: String,
    pub kind: ExternalKind,
    pub body: String,
    pub point: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub force: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<[f64; 6]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<WrenchFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndConfig {
    /// Body or anchor.
    pub body: String,
    pub point: String,
}

/// A 6×6 gain given as a scalar multiple of the identity, a diagonal or a
/// full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gain {
    Scalar(f64),
    Diagonal([f64; 6]),
    Full([[f64; 6]; 6]),
}

impl Gain {
    pub fn matrix(&self) -> Mat6 {
        match self {
            Gain::Scalar(k) => Mat6::identity() * *k,
            Gain::Diagonal(d) => Mat6::from_diagonal(&nalgebra::Vector6::from_column_slice(d)),
            Gain::Full(rows) => Mat6::from_fn(|i, j| rows[i][j]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosureConfig {
    pub name: String,
    pub left: EndConfig,
    pub right: EndConfig,
    pub stiffness: Gain,
    #[serde(default = "zero_gain")]
    pub damping: Gain,
}

fn zero_gain() -> Gain {
    Gain::Scalar(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    /// Output columns after `t`; all DOFs when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dofs: Vec<String>,
    /// Emit every n-th step.
    #[serde(default = "one")]
    pub every: usize,
}

fn one() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dofs: Vec::new(),
            every: 1,
        }
    }
}

/// One validation problem and where it was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// Every problem found in a scenario.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ScenarioErrors(pub Vec<Issue>);

impl fmt::Display for ScenarioErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len();
        write!(f, "{n} problem{} in scenario", if n == 1 { "" } else { "s" })?;
        for issue in &self.0 {
            write!(f, "\n  {issue}")?;
        }
        Ok(())
    }
}

impl ScenarioErrors {
    pub fn issues(&self) -> &[Issue] {
        &self.0
    }
}

/// Parse and validate scenario text. Syntax and type errors stop parsing;
/// otherwise every unknown key and every semantic problem is reported.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioErrors> {
    let de = toml::Deserializer::parse(text).map_err(|e| ScenarioErrors(vec![syntax_issue(text, &e)]))?;
    let mut unknown = Vec::new();
    let config: ScenarioConfig = serde_ignored::deserialize(de, |path| unknown.push(path_string(&path)))
        .map_err(|e| ScenarioErrors(vec![syntax_issue(text, &e)]))?;
    let mut issues: Vec<Issue> = unknown
        .into_iter()
        .map(|location| Issue {
            location,
            message: "unknown key".into(),
        })
        .collect();
    issues.extend(config.validate());
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(ScenarioErrors(issues))
    }
}

fn syntax_issue(text: &str, e: &toml::de::Error) -> Issue {
    let location = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            format!("line {line}, column {column}")
        }
        None => "document".into(),
    };
    Issue {
        location,
        message: e.message().trim().to_string(),
    }
}

fn path_string(path: &serde_ignored::Path<'_>) -> String {
    use serde_ignored::Path;
    match path {
        Path::Root => String::new(),
        Path::Seq { parent, index } => format!("{}[{index}]", path_string(parent)),
        Path::Map { parent, key } => {
            let p = path_string(parent);
            if p.is_empty() {
                key.to_string()
            } else {
                format!("{p}.{key}")
            }
        }
        Path::Some { parent } | Path::NewtypeStruct { parent } | Path::NewtypeVariant { parent } => path_string(parent),
    }
}

impl ScenarioConfig {
    /// Canonical TOML text; parsing it gives back an equal config.
    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string_pretty(self)
    }

    pub fn sequence(&self) -> EulerSequence {
        self.metadata.euler_sequence.parse().unwrap_or_default()
    }

    pub fn scheme(&self) -> Scheme {
        self.integration.scheme.parse().unwrap_or_default()
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn body(&self, name: &str) -> Option<&BodyConfig> {
        self.bodies.iter().find(|b| b.name == name)
    }

    /// Output names of all DOFs in block order.
    pub fn dof_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for j in &self.joints {
            match j.kind {
                JointKind::Free => {
                    for s in ["x", "y", "z", "phi", "theta", "psi"] {
                        names.push(format!("{}.{s}", j.body));
                    }
                }
                JointKind::Weld => {}
                _ => names.push(j.block_name().to_string()),
            }
        }
        names
    }

    /// Core body record with its named points.
    pub fn rigid_body(&self, body: &BodyConfig) -> Result<RigidBodyParams, twoport_core::Error> {
        let mut b = RigidBodyParams::new(&body.name, body.mass, v3(&body.com), m3(&body.inertia))?;
        for (name, p) in &body.points {
            b.add_point(name, v3(p))?;
        }
        Ok(b)
    }

    pub fn profile(&self, name: &str) -> Option<Profile> {
        let p = self.profiles.get(name)?;
        Some(match p.kind {
            ProfileKind::Constant => Profile::Constant(p.value.unwrap_or(0.0)),
            ProfileKind::Sine => Profile::Sine {
                amplitude: p.amplitude.unwrap_or(0.0),
                frequency: p.frequency.unwrap_or(0.0),
                phase: p.phase.unwrap_or(0.0),
            },
            ProfileKind::Table => Profile::Table {
                times: p.times.clone().unwrap_or_default(),
                values: p.values.clone().unwrap_or_default(),
            },
        })
    }

    /// All semantic problems; empty when the config can be built.
    pub fn validate(&self) -> Vec<Issue> {
        let mut c = Checker::default();
        if self.schema_version != SCHEMA_VERSION {
            c.push(
                "schema_version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema_version),
            );
        }
        if self.metadata.name.trim().is_empty() {
            c.push("metadata.name", "must not be empty");
        }
        c.finite("metadata.gravity", &self.metadata.gravity);
        if let Err(e) = self.metadata.euler_sequence.parse::<EulerSequence>() {
            c.push("metadata.euler_sequence", e);
        }
        let it = &self.integration;
        if !(it.dt > 0.0 && it.dt.is_finite()) {
            c.push("integration.dt", format!("time step {} must be positive", it.dt));
        }
        if !(it.t_final >= 0.0 && it.t_final.is_finite()) {
            c.push("integration.t_final", format!("final time {} must be non-negative", it.t_final));
        }
        if let Err(e) = it.scheme.parse::<Scheme>() {
            c.push("integration.scheme", e);
        }

        // Frames that can be referenced by name: anchors and bodies.
        let mut frames: HashMap<&str, &BTreeMap<String, [f64; 3]>> = HashMap::new();
        for (i, a) in self.anchors.iter().enumerate() {
            let loc = format!("anchors[{i}]");
            c.finite(&format!("{loc}.position"), &a.position);
            for (name, p) in &a.points {
                c.finite(&format!("{loc}.points.{name}"), p);
            }
            if frames.insert(&a.name, &a.points).is_some() {
                c.push(format!("{loc}.name"), format!("duplicate name `{}`", a.name));
            }
        }
        if self.bodies.is_empty() {
            c.push("bodies", "no dynamic terminal: the scenario declares no bodies");
        }
        for (i, b) in self.bodies.iter().enumerate() {
            let loc = format!("bodies[{i}]");
            if frames.insert(&b.name, &b.points).is_some() {
                c.push(format!("{loc}.name"), format!("duplicate name `{}`", b.name));
            }
            for (name, p) in &b.points {
                c.finite(&format!("{loc}.points.{name}"), p);
            }
            if let Err(e) = self.rigid_body(b) {
                c.push(loc, e.to_string());
            }
        }
        let point_exists = |frame: &str, point: &str| frames.get(frame).is_some_and(|pts| pts.contains_key(point));

        let mut attached: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut block_names: HashSet<&str> = self.anchors.iter().map(|a| a.name.as_str()).collect();
        for (i, j) in self.joints.iter().enumerate() {
            let loc = format!("joints[{i}]");
            if !self.bodies.iter().any(|b| b.name == j.body) {
                c.push(format!("{loc}.body"), format!("unknown body `{}`", j.body));
            } else {
                attached.entry(&j.body).or_default().push(i);
                if !point_exists(&j.body, &j.point) {
                    c.push(format!("{loc}.point"), format!("body `{}` has no point `{}`", j.body, j.point));
                }
            }
            if !block_names.insert(j.block_name()) {
                c.push(loc.clone(), format!("duplicate block name `{}`", j.block_name()));
            }
            self.validate_joint(&mut c, &loc, j, &point_exists);
        }
        for b in &self.bodies {
            match attached.get(b.name.as_str()).map_or(0, Vec::len) {
                0 => c.push(
                    format!("bodies.{}", b.name),
                    "body is not attached by any joint (use a `free` joint for a floating body)",
                ),
                1 => {}
                _ => {
                    let js: Vec<String> = attached[b.name.as_str()].iter().map(|k| format!("joints[{k}]")).collect();
                    c.push(
                        format!("bodies.{}", b.name),
                        format!(
                            "cycle: body is attached by {}; close kinematic loops with a loop closure",
                            js.join(" and ")
                        ),
                    );
                }
            }
        }
        self.check_parent_cycles(&mut c);

        for (name, p) in &self.profiles {
            let loc = format!("profiles.{name}");
            let need = |c: &mut Checker, field: &str, present: bool| {
                if !present {
                    c.push(format!("{loc}.{field}"), format!("required for {:?} profiles", p.kind).to_lowercase());
                }
            };
            match p.kind {
                ProfileKind::Constant => need(&mut c, "value", p.value.is_some()),
                ProfileKind::Sine => {
                    need(&mut c, "amplitude", p.amplitude.is_some());
                    need(&mut c, "frequency", p.frequency.is_some());
                }
                ProfileKind::Table => {
                    need(&mut c, "times", p.times.is_some());
                    need(&mut c, "values", p.values.is_some());
                }
            }
            if let Some(Err(e)) = self.profile(name).map(|pr| pr.validate()) {
                c.push(loc, e.to_string());
            }
        }

        for (i, e) in self.external_wrenches.iter().enumerate() {
            let loc = format!("external_wrenches[{i}]");
            if !self.bodies.iter().any(|b| b.name == e.body) {
                c.push(format!("{loc}.body"), format!("unknown body `{}`", e.body));
            } else if !point_exists(&e.body, &e.point) {
                c.push(format!("{loc}.point"), format!("body `{}` has no point `{}`", e.body, e.point));
            }
            let constant = matches!(e.kind, ExternalKind::Inertial | ExternalKind::Body);
            if constant && e.force.is_none() && e.torque.is_none() {
                c.push(loc.clone(), "constant wrench needs `force` and/or `torque`");
            }
            if !constant && (e.force.is_some() || e.torque.is_some()) {
                c.push(loc.clone(), "`force`/`torque` are only used by inertial and body wrenches");
            }
            for (field, v) in [("force", &e.force), ("torque", &e.torque)] {
                if let Some(v) = v {
                    c.finite(&format!("{loc}.{field}"), v);
                }
            }
            match e.kind {
                ExternalKind::Table => match (&e.times, &e.values) {
                    (Some(t), Some(v)) => {
                        let src = twoport_core::WrenchSource::Table {
                            times: t.clone(),
                            values: v.iter().map(|r| twoport_spatial::Vec6::from_column_slice(r)).collect(),
                            inertial: true,
                        };
                        if let Err(err) = src.validate() {
                            c.push(loc.clone(), err.to_string());
                        }
                    }
                    _ => c.push(loc.clone(), "table wrench needs `times` and `values`"),
                },
                _ => {
                    if e.times.is_some() || e.values.is_some() || e.frame.is_some() {
                        c.push(loc.clone(), "`times`, `values` and `frame` are only used by table wrenches");
                    }
                }
            }
        }

        for (i, cl) in self.loop_closures.iter().enumerate() {
            let loc = format!("loop_closures[{i}]");
            for (side, end) in [("left", &cl.left), ("right", &cl.right)] {
                if !frames.contains_key(end.body.as_str()) {
                    c.push(format!("{loc}.{side}.body"), format!("unknown body or anchor `{}`", end.body));
                } else if !point_exists(&end.body, &end.point) {
                    c.push(format!("{loc}.{side}.point"), format!("`{}` has no point `{}`", end.body, end.point));
                }
            }
            if let Err(e) = LoopClosure::new(&cl.name, cl.stiffness.matrix(), cl.damping.matrix()) {
                c.push(loc, e.to_string());
            }
        }

        let dofs = self.dof_names();
        for (i, d) in self.outputs.dofs.iter().enumerate() {
            if !dofs.contains(d) {
                c.push(format!("outputs.dofs[{i}]"), format!("unknown DOF `{d}`"));
            }
        }
        if self.outputs.every == 0 {
            c.push("outputs.every", "must be at least 1");
        }
        c.issues
    }

    fn validate_joint(&self, c: &mut Checker, loc: &str, j: &JointConfig, point_exists: &dyn Fn(&str, &str) -> bool) {
        let forbid = |c: &mut Checker, field: &str, present: bool| {
            if present {
                c.push(format!("{loc}.{field}"), format!("not used by {} joints", j.kind));
            }
        };
        if j.kind == JointKind::Free {
            for (field, present) in [
                ("name", j.name.is_some()),
                ("parent", j.parent.is_some()),
                ("parent_point", j.parent_point.is_some()),
                ("rotation", j.rotation.is_some()),
                ("axis", j.axis.is_some()),
                ("initial", j.initial.is_some()),
                ("rate", j.rate.is_some()),
                ("drive", j.drive.is_some()),
                ("locked", j.locked.is_some()),
            ] {
                forbid(c, field, present);
            }
            for (field, v) in [
                ("position", &j.position),
                ("attitude", &j.attitude),
                ("velocity", &j.velocity),
                ("angular_velocity", &j.angular_velocity),
            ] {
                if let Some(v) = v {
                    c.finite(&format!("{loc}.{field}"), v);
                }
            }
            if let Some(a) = j.attitude {
                if let Err(e) = EulerAngles::new(v3(&a), self.sequence()).check_chart() {
                    c.push(format!("{loc}.attitude"), e.to_string());
                }
            }
            return;
        }
        for (field, present) in [
            ("position", j.position.is_some()),
            ("attitude", j.attitude.is_some()),
            ("velocity", j.velocity.is_some()),
            ("angular_velocity", j.angular_velocity.is_some()),
        ] {
            forbid(c, field, present);
        }
        match (&j.parent, &j.parent_point) {
            (Some(p), Some(pp)) => {
                if !self.anchors.iter().any(|a| a.name == *p) && !self.bodies.iter().any(|b| b.name == *p) {
                    c.push(format!("{loc}.parent"), format!("unknown body or anchor `{p}`"));
                } else if !point_exists(p, pp) {
                    c.push(format!("{loc}.parent_point"), format!("`{p}` has no point `{pp}`"));
                }
                if *p == j.body {
                    c.push(format!("{loc}.parent"), "a body cannot be its own parent");
                }
            }
            (None, _) => c.push(format!("{loc}.parent"), format!("required for {} joints", j.kind)),
            (_, None) => c.push(format!("{loc}.parent_point"), format!("required for {} joints", j.kind)),
        }
        if let Some(r) = &j.rotation {
            if let Err(e) = Dcm::from_matrix(m3(r)) {
                c.push(format!("{loc}.rotation"), e.to_string());
            }
        }
        if j.kind == JointKind::Weld {
            for (field, present) in [
                ("name", j.name.is_some()),
                ("axis", j.axis.is_some()),
                ("initial", j.initial.is_some()),
                ("rate", j.rate.is_some()),
                ("drive", j.drive.is_some()),
                ("locked", j.locked.is_some()),
            ] {
                forbid(c, field, present);
            }
            return;
        }
        match j.axis {
            None => c.push(format!("{loc}.axis"), format!("required for {} joints", j.kind)),
            Some(a) => {
                let n = v3(&a).norm();
                if !(n > 1e-12 && n.is_finite()) {
                    c.push(format!("{loc}.axis"), "axis cannot be normalized (zero or non-finite length)");
                }
            }
        }
        if j.kind == JointKind::Prismatic {
            forbid(c, "locked", j.locked.is_some());
        }
        for (field, v) in [("initial", j.initial), ("rate", j.rate)] {
            if v.is_some_and(|x| !x.is_finite()) {
                c.push(format!("{loc}.{field}"), "must be finite");
            }
        }
        if let Some(d) = &j.drive {
            for (field, v) in [("stiffness", d.stiffness), ("damping", d.damping)] {
                if !(v >= 0.0 && v.is_finite()) {
                    c.push(format!("{loc}.drive.{field}"), format!("{v} must be non-negative"));
                }
            }
            if !d.reference.is_finite() {
                c.push(format!("{loc}.drive.reference"), "must be finite");
            }
            if let Some(p) = &d.profile {
                if !self.profiles.contains_key(p) {
                    c.push(format!("{loc}.drive.profile"), format!("unknown profile `{p}`"));
                }
            }
        }
    }

    /// Parent links that loop back on themselves never reach a free body or
    /// an anchor.
    fn check_parent_cycles(&self, c: &mut Checker) {
        let parent_of: HashMap<&str, &str> = self
            .joints
            .iter()
            .filter_map(|j| j.parent.as_deref().map(|p| (j.body.as_str(), p)))
            .collect();
        let mut reported: HashSet<&str> = HashSet::new();
        for start in parent_of.keys() {
            let mut seen = vec![*start];
            let mut cur = *start;
            while let Some(&p) = parent_of.get(cur) {
                if let Some(pos) = seen.iter().position(|s| *s == p) {
                    let cycle = &seen[pos..];
                    if cycle.iter().all(|b| reported.insert(b)) {
                        let mut names: Vec<&str> = cycle.to_vec();
                        names.sort_unstable();
                        c.push(
                            "joints",
                            format!(
                                "cycle through bodies {} without a loop closure",
                                names.iter().map(|n| format!("`{n}`")).collect::<Vec<_>>().join(", ")
                            ),
                        );
                    }
                    break;
                }
                seen.push(p);
                cur = p;
            }
        }
    }
}

#[derive(Default)]
struct Checker {
    issues: Vec<Issue>,
}

impl Checker {
    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            location: location.into(),
            message: message.into(),
        });
    }

    fn finite(&mut self, location: &str, v: &[f64]) {
        if !v.iter().all(|x| x.is_finite()) {
            self.push(location, "values must be finite");
        }
    }
}

pub(crate) fn v3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

pub(crate) fn m3(a: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|i, j| a[i][j])
}
