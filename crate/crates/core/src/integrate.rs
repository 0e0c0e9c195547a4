//! Fixed-step integration and the energy ledger.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::system::{CompiledSystem, EnergyTerms};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Rk4,
    /// Velocities first, then positions from the updated velocities.
    SemiImplicitEuler,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Rk4 => "rk4",
            Scheme::SemiImplicitEuler => "semi-implicit-euler",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Scheme::Rk4),
            "semi-implicit-euler" | "symplectic-euler" => Ok(Scheme::SemiImplicitEuler),
            other => Err(format!("unknown integration scheme `{other}` (expected rk4 or semi-implicit-euler)")),
        }
    }
}

/// Sampled states, one per step including both ends.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &DVector<f64>)> {
        self.times.last().copied().zip(self.states.last())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrationError {
    #[error("invalid integration settings: {0}")]
    Settings(String),
    #[error("simulation halted at t = {time}: {source}")]
    Halted {
        time: f64,
        /// Last valid state.
        state: DVector<f64>,
        /// Samples up to and including `time`.
        partial: Box<Trajectory>,
        source: Error,
    },
}

/// Number of steps to reach `t_final`; the last step is shortened when
/// `t_final` is not a multiple of `dt`.
pub fn step_count(dt: f64, t_final: f64) -> usize {
    let ratio = t_final / dt;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

fn rk4_step(sys: &CompiledSystem, t: f64, x: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let k1 = sys.derivative(t, x)?;
    let k2 = sys.derivative(t + 0.5 * h, &(x + &k1 * (0.5 * h)))?;
    let k3 = sys.derivative(t + 0.5 * h, &(x + &k2 * (0.5 * h)))?;
    let k4 = sys.derivative(t + h, &(x + &k3 * h))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

fn semi_implicit_step(sys: &CompiledSystem, mask: &[bool], t: f64, x: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
    let d = sys.derivative(t, x)?;
    let mut next = x.clone();
    for (i, m) in mask.iter().enumerate() {
        if *m {
            next[i] += h * d[i];
        }
    }
    let rates = sys.position_rates(&next)?;
    for (i, m) in mask.iter().enumerate() {
        if !*m {
            next[i] += h * rates[i];
        }
    }
    Ok(next)
}

/// Integrate from `t = 0` to `t_final` with fixed step `dt`.
pub fn integrate(
    sys: &CompiledSystem,
    x0: &DVector<f64>,
    dt: f64,
    t_final: f64,
    scheme: Scheme,
) -> std::result::Result<Trajectory, IntegrationError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(IntegrationError::Settings(format!("time step {dt} must be positive")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(IntegrationError::Settings(format!("final time {t_final} must be non-negative")));
    }
    if x0.len() != sys.state_len() {
        return Err(IntegrationError::Settings(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            sys.state_len()
        )));
    }
    let steps = step_count(dt, t_final);
    let mask = sys.velocity_mask();
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
    };
    traj.times.push(0.0);
    traj.states.push(x0.clone());
    let mut x = x0.clone();
    for k in 0..steps {
        let t = k as f64 * dt;
        let t_next = if k + 1 == steps { t_final } else { (k + 1) as f64 * dt };
        let h = t_next - t;
        let step = match scheme {
            Scheme::Rk4 => rk4_step(sys, t, &x, h),
            Scheme::SemiImplicitEuler => semi_implicit_step(sys, &mask, t, &x, h),
        };
        let next = step.and_then(|n| {
            if !n.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter("state became non-finite".into()));
            }
            sys.check_chart_crossing(&x, &n)?;
            Ok(n)
        });
        match next {
            Ok(n) => x = n,
            Err(source) => {
                return Err(IntegrationError::Halted {
                    time: t,
                    state: x,
                    partial: Box::new(traj),
                    source,
                })
            }
        }
        traj.times.push(t_next);
        traj.states.push(x.clone());
    }
    Ok(traj)
}

/// Per-sample energy bookkeeping along a trajectory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    pub terms: Vec<EnergyTerms>,
    /// Cumulative energy removed by dampers.
    pub dissipated: Vec<f64>,
    /// Cumulative work of drive profiles and non-conservative wrenches.
    pub work: Vec<f64>,
    /// `E(t) − E(0) + dissipated − work`.
    pub residual: Vec<f64>,
}

impl EnergyLedger {
    pub fn initial_energy(&self) -> f64 {
        self.terms.first().map_or(0.0, EnergyTerms::total)
    }

    /// Largest balance residual relative to `|E(0)|`.
    pub fn max_relative_residual(&self) -> f64 {
        let scale = self.initial_energy().abs().max(f64::MIN_POSITIVE);
        self.residual.iter().fold(0.0_f64, |m, r| m.max(r.abs())) / scale
    }

    /// Mechanical energy `E(t)` at every sample.
    pub fn totals(&self) -> Vec<f64> {
        self.terms.iter().map(EnergyTerms::total).collect()
    }
}

/// Energy terms at every sample; dissipation and work are accumulated with
/// the trapezoidal rule on the sampled power.
pub fn energy_audit(sys: &CompiledSystem, traj: &Trajectory) -> Result<EnergyLedger> {
    let mut ledger = EnergyLedger::default();
    let mut prev: Option<(f64, f64, f64)> = None;
    let (mut dissipated, mut work) = (0.0, 0.0);
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let e = sys.energy(*t, x)?;
        let p = sys.power(*t, x)?;
        if let Some((t0, d0, w0)) = prev {
            let h = t - t0;
            dissipated += 0.5 * h * (d0 + p.dissipation);
            work += 0.5 * h * (w0 + p.actuation);
        }
        prev = Some((*t, p.dissipation, p.actuation));
        let e0 = ledger.terms.first().map_or(e.total(), EnergyTerms::total);
        ledger.times.push(*t);
        ledger.terms.push(e);
        ledger.dissipated.push(dissipated);
        ledger.work.push(work);
        ledger.residual.push(e.total() - e0 + dissipated - work);
    }
    Ok(ledger)
}
