//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
//! any criterion fails. Run with `cargo test --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use common::*;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twoport_core::body::{gyroscopic_matrix, inertial_acceleration, inertial_form_wrench, spatial_form_wrench};
use twoport_core::{energy_audit, integrate, BlockId, CompiledSystem, RigidBodyParams, Scheme, Trajectory};
use twoport_oracle::{analytic_check, integrate_rk4, AnalyticCase};
use twoport_scenario::{parse_scenario, run_cli, ExternalKind, JointKind, ResultTable, ScenarioConfig};
use twoport_spatial::{dcm_to_euler, euler_to_dcm, rot_exp, stack, EulerAngles, Mat3, Vec3};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn run(sys: &CompiledSystem, dt: f64, t_final: f64) -> Trajectory {
    integrate(sys, &sys.initial_state(), dt, t_final, Scheme::Rk4).unwrap()
}

fn fmt3(v: &[f64; 3]) -> String {
    format!("[{:?}, {:?}, {:?}]", v[0], v[1], v[2])
}

fn fmt33(m: &Mat3) -> String {
    let row = |i: usize| format!("[{:?}, {:?}, {:?}]", m[(i, 0)], m[(i, 1)], m[(i, 2)]);
    format!("[{}, {}, {}]", row(0), row(1), row(2))
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Mat3 {
    let axis = random_vec(rng, 1.0).try_normalize(1e-3).unwrap_or(Vec3::z());
    *rot_exp(&axis, rng.random_range(-PI..PI)).unwrap().matrix()
}

/// Valid body: principal moments `(b+c, a+c, a+b)` rotated at random.
fn random_body(rng: &mut ChaCha8Rng) -> RigidBodyParams {
    let (a, b, c) = (rng.random_range(0.01..3.0), rng.random_range(0.01..3.0), rng.random_range(0.01..3.0));
    let q = random_rotation(rng);
    let inertia = q * Mat3::from_diagonal(&Vec3::new(b + c, a + c, a + b)) * q.transpose();
    RigidBodyParams::new("b", rng.random_range(0.1..10.0), random_vec(rng, 1.0), inertia).unwrap()
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let body = random_body(&mut rng);
        let p = random_vec(&mut rng, 3.0);
        let twist = stack(&random_vec(&mut rng, 3.0), &random_vec(&mut rng, 3.0));
        let accel = stack(&random_vec(&mut rng, 3.0), &random_vec(&mut rng, 3.0));
        let spatial = spatial_form_wrench(&body, &p, &accel, &twist);
        let omega = Vec3::new(twist[3], twist[4], twist[5]);
        let inertial = inertial_form_wrench(&body, &p, &inertial_acceleration(&accel, &twist), &omega);
        worst = worst.max((spatial - inertial).amax());
    }
    verdict(worst < 1e-11, format!("1000 samples, max |ΔW| = {worst:.2e} (tol 1e-11)"))
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let body = random_body(&mut rng);
        let d = *body.dynamic_model_at(&random_vec(&mut rng, 3.0)).matrix();
        let x = stack(&random_vec(&mut rng, 5.0), &random_vec(&mut rng, 5.0));
        let power = x.dot(&(gyroscopic_matrix(&x) * d * x));
        worst = worst.max(power.abs() / (d.norm() * x.norm_squared()));
    }
    verdict(
        worst < 1e-12,
        format!("1000 samples, max |xᵀC(x)Dx| / (‖D‖‖x‖²) = {worst:.2e} (tol 1e-12)"),
    )
}

/// Relative drift of kinetic energy and inertial angular momentum over a
/// torque-free run about the centre of mass.
fn tumbling_drift(dt: f64) -> (f64, f64) {
    let inertia = Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0));
    let w0 = Vec3::new(1.0, 0.5, -0.3);
    // point the momentum along inertial z: the zyx chart stays regular
    let h = (inertia * w0).normalize();
    let axis = h.cross(&Vec3::z()).normalize();
    let align = rot_exp(&axis, h.dot(&Vec3::z()).acos()).unwrap();
    let att = dcm_to_euler(&align, twoport_spatial::EulerSequence::Zyx).unwrap().angles;
    let text = format!(
        r#"
schema_version = 1
[metadata]
name = "tumbling"
gravity = [0.0, 0.0, 0.0]
[[bodies]]
name = "brick"
mass = 1.0
inertia = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]
points = {{ G = [0.0, 0.0, 0.0] }}
[[joints]]
type = "free"
body = "brick"
point = "G"
attitude = {}
angular_velocity = {}
"#,
        fmt3(&[att[0], att[1], att[2]]),
        fmt3(&[w0[0], w0[1], w0[2]])
    );
    let sys = compile(&parse_scenario(&text).unwrap());
    let traj = run(&sys, dt, 10.0);
    let measure = |x: &DVector<f64>| {
        let w = Vec3::new(x[3], x[4], x[5]);
        let v = Vec3::new(x[0], x[1], x[2]);
        let th = EulerAngles::new(Vec3::new(x[9], x[10], x[11]), sys.sequence());
        let energy = 0.5 * w.dot(&(inertia * w)) + 0.5 * v.norm_squared();
        (energy, euler_to_dcm(&th).matrix() * inertia * w)
    };
    let (e0, h0) = measure(&traj.states[0]);
    let (mut de, mut dh) = (0.0_f64, 0.0_f64);
    for x in &traj.states {
        let (e, h) = measure(x);
        de = de.max((e - e0).abs() / e0);
        dh = dh.max((h - h0).norm() / h0.norm());
    }
    (de, dh)
}

fn criterion_3() -> Verdict {
    let (de, dh) = tumbling_drift(1e-3);
    let (de_half, dh_half) = tumbling_drift(5e-4);
    // at 1e-3 the truncation drift sits below round-off, so the order is
    // measured where it is resolvable
    let (e1, h1) = tumbling_drift(1e-2);
    let (e2, h2) = tumbling_drift(5e-3);
    let (re, rh) = (e1 / e2, h1 / h2);
    let ratio_ok = |r: f64| (12.0..=20.0).contains(&r);
    verdict(
        de < 1e-8 && dh < 1e-8 && ratio_ok(re) && ratio_ok(rh),
        format!(
            "dt 1e-3: drift E {de:.2e}, H {dh:.2e} (tol 1e-8); halving 1e-2 -> 5e-3: E x{re:.1}, H x{rh:.1} \
             (expected ≈16, accepted 12-20); halving 1e-3 -> 5e-4 is round-off bound: E x{:.1}, H x{:.1}",
            de / de_half,
            dh / dh_half
        ),
    )
}

const PENDULUM: &str = r#"
schema_version = 1
[metadata]
name = "pendulum"
gravity = [0.0, -9.81, 0.0]
[[anchors]]
name = "ground"
points = { O = [0.0, 0.0, 0.0] }
[[bodies]]
name = "bob"
mass = 2.0
com = [0.0, -1.2, 0.0]
points = { P = [0.0, 0.0, 0.0] }
[[joints]]
type = "revolute"
name = "theta"
body = "bob"
point = "P"
parent = "ground"
parent_point = "O"
axis = [0.0, 0.0, 1.0]
"#;

fn signal(sys: &CompiledSystem, traj: &Trajectory, index: usize) -> Vec<f64> {
    traj.states.iter().map(|x| sys.outputs(x).unwrap()[index]).collect()
}

fn criterion_4() -> Verdict {
    let mut lines = Vec::new();
    let mut passed = true;
    let mut record = |label: &str, case: AnalyticCase, times: &[f64], s: &[f64]| {
        let out = analytic_check(&case, times, s);
        passed &= out.passed;
        lines.push(format!(
            "{label} {:.6} vs {:.6} (err {:.1e}, tol {:.0e})",
            out.measured, out.expected, out.relative_error, out.tolerance
        ));
    };

    let small = parse_scenario(&format!("{PENDULUM}initial = 0.01\n")).unwrap();
    let sys = compile(&small);
    let traj = run(&sys, 1e-3, 20.0);
    record(
        "small-angle period",
        AnalyticCase::SmallAnglePendulum {
            length: 1.2,
            gravity: 9.81,
        },
        &traj.times,
        &signal(&sys, &traj, 0),
    );

    let spring = r#"
schema_version = 1
[metadata]
name = "spring"
gravity = [0.0, -9.81, 0.0]
[[anchors]]
name = "ground"
points = { O = [0.0, 0.0, 0.0] }
[[bodies]]
name = "cart"
mass = 1.0
points = { C = [0.0, 0.0, 0.0] }
[[joints]]
type = "prismatic"
name = "x"
body = "cart"
point = "C"
parent = "ground"
parent_point = "O"
axis = [1.0, 0.0, 0.0]
initial = 0.1
drive = { stiffness = 4.0 }
"#;
    let sys = compile(&parse_scenario(spring).unwrap());
    let traj = run(&sys, 1e-3, 20.0);
    record(
        "spring frequency",
        AnalyticCase::Harmonic {
            stiffness: 4.0,
            mass: 1.0,
        },
        &traj.times,
        &signal(&sys, &traj, 0),
    );

    let top = r#"
schema_version = 1
[metadata]
name = "top"
gravity = [0.0, 0.0, 0.0]
[[bodies]]
name = "top"
mass = 1.0
inertia = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]
points = { G = [0.0, 0.0, 0.0] }
[[joints]]
type = "free"
body = "top"
point = "G"
angular_velocity = [0.1, 0.0, 10.0]
"#;
    let sys = compile(&parse_scenario(top).unwrap());
    let traj = run(&sys, 1e-3, 5.0);
    let wx: Vec<f64> = traj.states.iter().map(|x| x[3]).collect();
    record(
        "top precession",
        AnalyticCase::SymmetricTop {
            transverse: 1.0,
            axial: 2.0,
            spin: 10.0,
        },
        &traj.times,
        &wx,
    );

    let amplitude = 170f64.to_radians();
    let large = parse_scenario(&format!("{PENDULUM}initial = {amplitude:?}\n")).unwrap();
    let sys = compile(&large);
    let traj = run(&sys, 1e-3, 30.0);
    record(
        "170° period",
        AnalyticCase::LargeAnglePendulum {
            length: 1.2,
            gravity: 9.81,
            amplitude,
        },
        &traj.times,
        &signal(&sys, &traj, 0),
    );
    verdict(passed, lines.join("; "))
}

fn criterion_5() -> Verdict {
    let pair = Pair::new(balloon());
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst = 0.0_f64;
    for k in 0..100 {
        let (q, qd) = random_state(&pair, &mut rng);
        let x = pair.to_engine(&q, &qd);
        let t = 0.05 * k as f64;
        worst = worst.max(relative_inf(&pair.engine_accel(t, &x), &pair.oracle_accel(t, &q, &qd), 1e-12));
    }
    verdict(worst < 1e-5, format!("100 balloon states, max relative error {worst:.2e} (tol 1e-5)"))
}

/// Largest output deviation between an engine run and an oracle run of the
/// same scenario, per DOF.
fn trajectory_deviation(pair: &Pair, dt: f64, t_final: f64, engine: &Trajectory) -> Vec<f64> {
    let (q0, qd0) = pair.to_oracle(&pair.sys.initial_state());
    let oracle = integrate_rk4(&pair.model, &q0, &qd0, dt, t_final).unwrap();
    assert_eq!(oracle.times.len(), engine.times.len());
    let mut dev = vec![0.0_f64; q0.len()];
    for (x, q) in engine.states.iter().zip(&oracle.q) {
        for (d, (a, b)) in dev.iter_mut().zip(pair.sys.outputs(x).unwrap().iter().zip(q.iter())) {
            *d = d.max((a - b).abs());
        }
    }
    dev
}

const DOUBLE_PENDULUM: &str = r#"
schema_version = 1
[metadata]
name = "double-pendulum"
gravity = [0.0, -9.81, 0.0]
[[anchors]]
name = "ground"
points = { O = [0.0, 0.0, 0.0] }
[[bodies]]
name = "upper"
mass = 2.0
com = [0.0, -1.2, 0.0]
points = { S = [0.0, 0.0, 0.0], P1 = [0.0, -1.2, 0.0] }
[[bodies]]
name = "lower"
mass = 3.0
com = [0.0, -1.6, 0.0]
points = { P1 = [0.0, 0.0, 0.0] }
[[joints]]
type = "revolute"
name = "theta1"
body = "upper"
point = "S"
parent = "ground"
parent_point = "O"
axis = [0.0, 0.0, 1.0]
initial = 2.9670597283903604
[[joints]]
type = "revolute"
name = "theta2"
body = "lower"
point = "P1"
parent = "upper"
parent_point = "P1"
axis = [0.0, 0.0, 1.0]
initial = -2.9670597283903604
"#;

fn criterion_6(balloon_run: &Trajectory) -> Verdict {
    let pair = Pair::new(parse_scenario(DOUBLE_PENDULUM).unwrap());
    let engine = run(&pair.sys, 1e-4, 1.0);
    let dp = trajectory_deviation(&pair, 1e-4, 1.0, &engine).into_iter().fold(0.0, f64::max);

    let pair = Pair::new(balloon());
    let dev = trajectory_deviation(&pair, 1e-4, 5.0, balloon_run);
    let names = pair.sys.output_names();
    let (k, worst) = dev.iter().enumerate().fold((0, 0.0), |m, (k, d)| if *d > m.1 { (k, *d) } else { m });
    verdict(
        dp < 1e-6 && worst < 1e-5,
        format!(
            "double pendulum 1 s max dev {dp:.2e} rad (tol 1e-6); balloon 5 s max dev {worst:.2e} on `{}` (tol 1e-5)",
            names[k]
        ),
    )
}

fn criterion_7(sys: &CompiledSystem, balloon_run: &Trajectory) -> Verdict {
    let ledger = energy_audit(sys, balloon_run).unwrap();
    let residual = ledger.max_relative_residual();
    let totals = ledger.totals();
    let rise = totals.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    verdict(
        residual < 1e-6 && rise <= 0.0,
        format!(
            "E0 = {:.6} J, max |residual|/|E0| = {residual:.2e} (tol 1e-6), largest step change {rise:.2e} J (must not be positive)",
            ledger.initial_energy()
        ),
    )
}

struct WeldCase {
    a_mass: f64,
    a_com: Vec3,
    a_inertia: Mat3,
    w: Vec3,
    b_mass: f64,
    b_com: Vec3,
    b_inertia: Mat3,
    q: Vec3,
    rw: Mat3,
}

impl WeldCase {
    fn new() -> Self {
        WeldCase {
            a_mass: 2.0,
            a_com: Vec3::new(0.1, -0.2, 0.3),
            a_inertia: Mat3::new(0.5, 0.02, -0.01, 0.02, 0.7, 0.03, -0.01, 0.03, 0.6),
            w: Vec3::new(0.4, 0.1, -0.2),
            b_mass: 1.5,
            b_com: Vec3::new(0.05, 0.3, 0.0),
            b_inertia: Mat3::new(0.2, 0.0, 0.01, 0.0, 0.3, 0.0, 0.01, 0.0, 0.25),
            q: Vec3::new(-0.1, 0.0, 0.1),
            rw: *rot_exp(&Vec3::new(1.0, 2.0, 3.0).normalize(), 0.7).unwrap().matrix(),
        }
    }

    /// Mass, centre of mass and central inertia of the welded pair, in the
    /// frame of `a`.
    fn combined(&self) -> (f64, Vec3, Mat3) {
        let m = self.a_mass + self.b_mass;
        let b_com = self.w + self.rw * (self.b_com - self.q);
        let com = (self.a_com * self.a_mass + b_com * self.b_mass) / m;
        let shift = |mass: f64, d: Vec3| (Mat3::identity() * d.norm_squared() - d * d.transpose()) * mass;
        let inertia = self.a_inertia
            + shift(self.a_mass, self.a_com - com)
            + self.rw * self.b_inertia * self.rw.transpose()
            + shift(self.b_mass, b_com - com);
        (m, com, inertia)
    }

    fn header(port: &str) -> String {
        let attach = match port {
            "free" => "[[joints]]\ntype = \"free\"\nbody = \"a\"\npoint = \"P\"\n".to_string(),
            _ => "[[anchors]]\nname = \"ground\"\npoints = { O = [0.0, 0.0, 0.0] }\n\n[[joints]]\ntype = \"revolute\"\nname = \"hinge\"\nbody = \"a\"\npoint = \"P\"\nparent = \"ground\"\nparent_point = \"O\"\naxis = [0.3, 0.2, 1.0]\n".to_string(),
        };
        format!(
            "schema_version = 1\n[metadata]\nname = \"weld\"\ngravity = [0.0, -9.81, 0.0]\n\n{attach}\n\
             [[external_wrenches]]\nname = \"push\"\nkind = \"body\"\nbody = \"a\"\npoint = \"P\"\n\
             force = [1.0, -2.0, 0.5]\ntorque = [0.3, 0.1, -0.2]\n\n"
        )
    }

    fn two_bodies(&self, port: &str, locked: bool) -> String {
        let child = if locked {
            let u = Vec3::new(0.2, -0.5, 1.0).normalize();
            let q0 = 0.9;
            let dcm0 = self.rw * rot_exp(&u, -q0).unwrap().matrix();
            format!(
                "type = \"revolute\"\nname = \"lock\"\naxis = {}\nrotation = {}\ninitial = {q0:?}\nlocked = true\n",
                fmt3(&[u[0], u[1], u[2]]),
                fmt33(&dcm0)
            )
        } else {
            format!("type = \"weld\"\nrotation = {}\n", fmt33(&self.rw))
        };
        format!(
            "{}[[bodies]]\nname = \"a\"\nmass = {:?}\ncom = {}\ninertia = {}\npoints = {{ P = [0.0, 0.0, 0.0], W = {} }}\n\n\
             [[bodies]]\nname = \"b\"\nmass = {:?}\ncom = {}\ninertia = {}\npoints = {{ Q = {} }}\n\n\
             [[joints]]\n{child}body = \"b\"\npoint = \"Q\"\nparent = \"a\"\nparent_point = \"W\"\n",
            Self::header(port),
            self.a_mass,
            fmt3(&self.a_com.into()),
            fmt33(&self.a_inertia),
            fmt3(&self.w.into()),
            self.b_mass,
            fmt3(&self.b_com.into()),
            fmt33(&self.b_inertia),
            fmt3(&self.q.into()),
        )
    }

    fn one_body(&self, port: &str) -> String {
        let (m, com, inertia) = self.combined();
        format!(
            "{}[[bodies]]\nname = \"a\"\nmass = {m:?}\ncom = {}\ninertia = {}\npoints = {{ P = [0.0, 0.0, 0.0] }}\n",
            Self::header(port),
            fmt3(&com.into()),
            fmt33(&inertia)
        )
    }
}

/// Largest relative difference of port responses over random states:
/// free-body accelerations, or the hinge acceleration and the wrench the
/// hinge passes to the ground.
fn port_difference(a: &CompiledSystem, b: &CompiledSystem, port: &str, rng: &mut ChaCha8Rng) -> f64 {
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let (mut xa, mut xb) = (a.initial_state(), b.initial_state());
        let hinge = BlockId(if port == "free" { 0 } else { 1 });
        if port == "free" {
            let mut s = DVector::zeros(12);
            for k in 0..12 {
                s[k] = rng.random_range(-1.0..1.0);
            }
            xa.rows_mut(0, 12).copy_from(&s);
            xb.rows_mut(0, 12).copy_from(&s);
        } else {
            let (q, rate) = (rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0));
            a.set_joint_state(hinge, &mut xa, q, rate).unwrap();
            b.set_joint_state(hinge, &mut xb, q, rate).unwrap();
        }
        let (ea, eb) = (a.evaluate(0.0, &xa).unwrap(), b.evaluate(0.0, &xb).unwrap());
        let (ra, rb) = if port == "free" {
            (ea.blocks[0].accel, eb.blocks[0].accel)
        } else {
            let (ja, jb) = (ea.blocks[1].joint.as_ref().unwrap(), eb.blocks[1].joint.as_ref().unwrap());
            worst = worst.max((ja.accel - jb.accel).abs() / jb.accel.abs().max(1.0));
            (ja.wrench_to_parent, jb.wrench_to_parent)
        };
        worst = worst.max((ra - rb).amax() / rb.amax().max(1.0));
    }
    worst
}

fn criterion_8() -> Verdict {
    let case = WeldCase::new();
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut parts = Vec::new();
    let mut worst = 0.0_f64;
    for port in ["free", "hinge"] {
        let single = compile(&parse_scenario(&case.one_body(port)).unwrap());
        let welded = compile(&parse_scenario(&case.two_bodies(port, false)).unwrap());
        let locked = compile(&parse_scenario(&case.two_bodies(port, true)).unwrap());
        let weld_vs_single = port_difference(&welded, &single, port, &mut rng);
        let locked_vs_weld = port_difference(&locked, &welded, port, &mut rng);
        worst = worst.max(weld_vs_single).max(locked_vs_weld);
        parts.push(format!(
            "{port} port: weld vs combined {weld_vs_single:.2e}, locked vs weld {locked_vs_weld:.2e}"
        ));
    }
    verdict(worst < 1e-10, format!("{} (tol 1e-10)", parts.join("; ")))
}

const CLOSURE: &str = r#"
schema_version = 1
[metadata]
name = "closed-pair"
gravity = [0.0, -9.81, 0.0]
[integration]
dt = 1e-4
t_final = 0.5
[[anchors]]
name = "ground"
position = [0.0, 1.0, 0.0]
points = { O1 = [0.0, 0.0, 0.0], O2 = [2.0, 0.0, 0.0] }
[[bodies]]
name = "left"
mass = 1.0
com = [0.5, 0.0, 0.0]
inertia = [[0.0, 0.0, 0.0], [0.0, 0.08333333333333333, 0.0], [0.0, 0.0, 0.08333333333333333]]
points = { H = [0.0, 0.0, 0.0], T = [1.0, 0.0, 0.0] }
[[bodies]]
name = "right"
mass = 1.0
com = [-0.5, 0.0, 0.0]
inertia = [[0.0, 0.0, 0.0], [0.0, 0.08333333333333333, 0.0], [0.0, 0.0, 0.08333333333333333]]
points = { H = [0.0, 0.0, 0.0], T = [-1.0, 0.0, 0.0] }
[[joints]]
type = "revolute"
name = "a"
body = "left"
point = "H"
parent = "ground"
parent_point = "O1"
axis = [0.0, 0.0, 1.0]
[[joints]]
type = "revolute"
name = "b"
body = "right"
point = "H"
parent = "ground"
parent_point = "O2"
axis = [0.0, 0.0, 1.0]
[[loop_closures]]
name = "tie"
left = { body = "left", point = "T" }
right = { body = "right", point = "T" }
stiffness = 1e5
damping = 100.0
"#;

fn criterion_9() -> Verdict {
    let config = parse_scenario(CLOSURE).unwrap();
    let sys = compile(&config);
    let traj = run(&sys, config.integration.dt, config.integration.t_final);
    let (_, x) = traj.last().unwrap();
    let (a, ra) = sys.joint_state(BlockId(1), x).unwrap();
    let (b, rb) = sys.joint_state(BlockId(2), x).unwrap();
    // tips from the joint angles: hinges at x = 0 and x = 2, unit arms
    let tip_a = Vec3::new(a.cos(), a.sin(), 0.0);
    let tip_b = Vec3::new(2.0 - b.cos(), -b.sin(), 0.0);
    let gap = ((tip_a - tip_b).norm_squared() + (a - b).powi(2)).sqrt();
    // symmetric statics: each arm's weight moment m g L/2 is carried by a
    // pure closure torque, with no shear
    let static_wrench = 1.0 * 9.81 * 0.5;
    let predicted = static_wrench / 1e5;
    let gap_err = (gap - predicted).abs() / predicted;

    let ledger = energy_audit(&sys, &traj).unwrap();
    let residual = ledger.max_relative_residual();
    let stored = ledger.terms.last().unwrap().closures;
    let expected_stored = 0.5 * 1e5 * gap * gap;
    let stored_err = (stored - expected_stored).abs() / expected_stored;
    let still = ra.abs().max(rb.abs());
    verdict(
        gap_err < 0.05 && residual < 1e-6 && stored_err < 0.05 && still < 1e-6,
        format!(
            "gap {gap:.4e} vs |W|/K = {predicted:.4e} ({:.2}% off, tol 5%); closure energy {stored:.3e} J vs ½Kδ² {expected_stored:.3e} J; balance residual {residual:.2e} of |E0| (tol 1e-6); final rates {still:.1e}",
            100.0 * gap_err
        ),
    )
}

/// The same scenario with every body frame turned by `q`.
fn rotate_frames(config: &ScenarioConfig, q: &Mat3) -> ScenarioConfig {
    let mut out = config.clone();
    let rv = |v: &[f64; 3]| -> [f64; 3] { (q * Vec3::from(*v)).into() };
    let anchors: Vec<String> = config.anchors.iter().map(|a| a.name.clone()).collect();
    for b in &mut out.bodies {
        b.com = rv(&b.com);
        let i = Mat3::from_fn(|r, c| b.inertia[r][c]);
        let i2 = q * i * q.transpose();
        b.inertia = std::array::from_fn(|r| std::array::from_fn(|c| i2[(r, c)]));
        for p in b.points.values_mut() {
            *p = rv(p);
        }
    }
    for j in &mut out.joints {
        j.axis = j.axis.as_ref().map(rv);
        if j.kind != JointKind::Free {
            let from_parent = j.parent.as_ref().is_some_and(|p| !anchors.contains(p));
            let d = j.rotation.map_or(Mat3::identity(), |r| Mat3::from_fn(|a, b| r[a][b]));
            let d2 = if from_parent { q * d } else { d } * q.transpose();
            j.rotation = Some(std::array::from_fn(|r| std::array::from_fn(|c| d2[(r, c)])));
        } else {
            let att = j.attitude.unwrap_or_default();
            let r = euler_to_dcm(&EulerAngles::new(Vec3::from(att), config.sequence()));
            let r2 = r.matrix() * q.transpose();
            let th = dcm_to_euler(&twoport_spatial::Dcm::from_matrix(r2).unwrap(), config.sequence()).unwrap();
            j.attitude = Some(th.angles.into());
        }
        j.velocity = j.velocity.as_ref().map(rv);
        j.angular_velocity = j.angular_velocity.as_ref().map(rv);
    }
    for e in &mut out.external_wrenches {
        if e.kind == ExternalKind::Body {
            e.force = e.force.as_ref().map(rv);
            e.torque = e.torque.as_ref().map(rv);
        }
    }
    out
}

fn criterion_10() -> Verdict {
    let config = balloon();
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let q = loop {
        let q = random_rotation(&mut rng);
        let th = dcm_to_euler(&twoport_spatial::Dcm::from_matrix(q.transpose()).unwrap(), config.sequence()).unwrap();
        if th.middle().abs() < 1.0 {
            break q;
        }
    };
    let rotated = rotate_frames(&config, &q);
    let (s1, s2) = (compile(&config), compile(&rotated));
    let (dt, tf) = (config.integration.dt, config.integration.t_final);
    let (t1, t2) = (run(&s1, dt, tf), run(&s2, dt, tf));
    let mut worst = 0.0_f64;
    let mut worst_att = 0.0_f64;
    for (x1, x2) in t1.states.iter().zip(&t2.states) {
        let (o1, o2) = (s1.outputs(x1).unwrap(), s2.outputs(x2).unwrap());
        for k in [0, 1, 2, 6, 7, 8] {
            worst = worst.max((o1[k] - o2[k]).abs());
        }
        let r1 = euler_to_dcm(&EulerAngles::new(Vec3::new(o1[3], o1[4], o1[5]), s1.sequence()));
        let r2 = euler_to_dcm(&EulerAngles::new(Vec3::new(o2[3], o2[4], o2[5]), s2.sequence()));
        worst_att = worst_att.max((r1.matrix() - r2.matrix() * q).amax());
    }
    verdict(
        worst < 1e-9 && worst_att < 1e-9,
        format!("balloon {tf} s: max position/joint change {worst:.2e}, attitude change {worst_att:.2e} (tol 1e-9)"),
    )
}

fn criterion_11() -> Verdict {
    let config = balloon();
    let out = Command::new(env!("CARGO_BIN_EXE_twoport"))
        .args(["run", balloon_path().to_str().unwrap()])
        .output()
        .unwrap();
    let table = ResultTable::read_csv(out.stdout.as_slice());
    let expected_rows = (config.integration.t_final / config.integration.dt).round() as usize + 1;
    let rows = table.as_ref().map_or(0, |t| t.len());
    let run_ok = out.status.code() == Some(0) && rows == expected_rows;

    let mut mismatches = Vec::new();
    for (name, expected) in CORPUS {
        let path = corpus(name);
        let code = run_cli(["twoport", "run", path.as_str()], &mut Vec::new(), &mut Vec::new());
        if code != expected {
            mismatches.push(format!("{name}: {code} (expected {expected})"));
        }
    }
    let usage = run_cli(["twoport", "run", "--dt"], &mut Vec::new(), &mut Vec::new());
    if usage != 2 {
        mismatches.push(format!("usage error: {usage} (expected 2)"));
    }
    let missing = run_cli(["twoport", "run", "/no/such.scn"], &mut Vec::new(), &mut Vec::new());
    if missing != 3 {
        mismatches.push(format!("missing file: {missing} (expected 3)"));
    }
    verdict(
        run_ok && mismatches.is_empty(),
        format!(
            "balloon exit {:?}, {rows} rows (expected {expected_rows}); {} corpus cases{}",
            out.status.code(),
            CORPUS.len() + 2,
            if mismatches.is_empty() {
                " all match".to_string()
            } else {
                format!(", mismatches: {}", mismatches.join(", "))
            }
        ),
    )
}

fn crashed(payload: Box<dyn std::any::Any + Send>) -> (Verdict, f64) {
    let msg = payload
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_default();
    (verdict(false, format!("panicked: {msg}")), 0.0)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let names = [
        "form equivalence",
        "gyroscopic power neutrality",
        "conservation (tumbling body)",
        "analytic cases",
        "oracle accelerations (balloon)",
        "oracle trajectories",
        "energy audit (balloon)",
        "composite equivalence",
        "loop closure",
        "frame invariance",
        "CLI contract",
    ];
    let results: Vec<(Verdict, f64)> = std::thread::scope(|s| {
        let timed = |f: Box<dyn FnOnce() -> Verdict + Send>| {
            move || {
                let t = Instant::now();
                let v = f();
                (v, t.elapsed().as_secs_f64())
            }
        };
        let balloon_run = s.spawn(|| {
            let sys = compile(&balloon());
            let traj = run(&sys, 1e-4, 5.0);
            (sys, traj)
        });
        let early: Vec<_> = [
            Box::new(criterion_1) as Box<dyn FnOnce() -> Verdict + Send>,
            Box::new(criterion_2),
            Box::new(criterion_3),
            Box::new(criterion_4),
            Box::new(criterion_5),
        ]
        .into_iter()
        .map(|f| s.spawn(timed(f)))
        .collect();
        let late: Vec<_> = [
            Box::new(criterion_8) as Box<dyn FnOnce() -> Verdict + Send>,
            Box::new(criterion_9),
            Box::new(criterion_10),
            Box::new(criterion_11),
        ]
        .into_iter()
        .map(|f| s.spawn(timed(f)))
        .collect();
        let shared = Arc::new(balloon_run.join().unwrap());
        let for_c6 = Arc::clone(&shared);
        let c6 = s.spawn(move || {
            let t = Instant::now();
            (criterion_6(&for_c6.1), t.elapsed().as_secs_f64())
        });
        let t = Instant::now();
        let c7 = (criterion_7(&shared.0, &shared.1), t.elapsed().as_secs_f64());
        let mut all: Vec<(Verdict, f64)> = early.into_iter().map(|h| h.join().unwrap_or_else(crashed)).collect();
        all.push(c6.join().unwrap_or_else(crashed));
        all.push(c7);
        all.extend(late.into_iter().map(|h| h.join().unwrap_or_else(crashed)));
        all
    });

    let mut failed = 0;
    println!();
    for (k, ((v, secs), name)) in results.iter().zip(names).enumerate() {
        let mark = if v.passed { "PASS" } else { "FAIL" };
        if !v.passed {
            failed += 1;
        }
        println!("{mark} {:>2} {name} [{secs:.1} s]: {}", k + 1, v.detail);
    }
    println!(
        "\nacceptance: {} of {} criteria passed in {:.1} s",
        names.len() - failed,
        names.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
