//! Scalar force/torque laws attached to joint drive inputs.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Time profile added on top of the spring-damper part of a drive law.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// `amplitude · sin(2π·frequency·t + phase)`.
    Sine { amplitude: f64, frequency: f64, phase: f64 },
    /// Piecewise-linear samples, held constant outside the table.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Constant(v) if !v.is_finite() => Err(Error::InvalidParameter("profile value is not finite".into())),
            Profile::Sine { amplitude, frequency, phase }
                if ![amplitude, frequency, phase].iter().all(|x| x.is_finite()) =>
            {
                Err(Error::InvalidParameter("sine profile has non-finite parameters".into()))
            }
            Profile::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::InvalidParameter(format!(
                        "profile table needs matching non-empty columns ({} times, {} values)",
                        times.len(),
                        values.len()
                    )));
                }
                check_times(times)
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Constant(v) => *v,
            Profile::Sine { amplitude, frequency, phase } => amplitude * (2.0 * PI * frequency * t + phase).sin(),
            Profile::Table { times, values } => {
                let (i, w) = bracket(times, t);
                if w == 0.0 {
                    values[i]
                } else {
                    values[i] * (1.0 - w) + values[i + 1] * w
                }
            }
        }
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if !times.iter().all(|t| t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("table times must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Index `i` and weight `w` such that the interpolated value is
/// `(1 − w)·y[i] + w·y[i+1]`; `w = 0` outside the table.
pub(crate) fn bracket(times: &[f64], t: f64) -> (usize, f64) {
    let n = times.len();
    if n == 1 || t <= times[0] {
        return (0, 0.0);
    }
    if t >= times[n - 1] {
        return (n - 1, 0.0);
    }
    let i = times.partition_point(|x| *x <= t) - 1;
    (i, (t - times[i]) / (times[i + 1] - times[i]))
}

/// `u = −k (q − q_ref) − d q̇ + profile(t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriveLaw {
    pub stiffness: f64,
    pub damping: f64,
    pub reference: f64,
    pub profile: Option<Profile>,
}

impl DriveLaw {
    /// No drive: the joint is free.
    pub fn free() -> Self {
        DriveLaw::default()
    }

    pub fn spring_damper(stiffness: f64, damping: f64) -> Self {
        DriveLaw {
            stiffness,
            damping,
            ..DriveLaw::default()
        }
    }

    pub fn with_reference(mut self, reference: f64) -> Self {
        self.reference = reference;
        self
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness.is_finite() && self.stiffness >= 0.0) {
            return Err(Error::InvalidParameter(format!("drive stiffness {} must be non-negative", self.stiffness)));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::InvalidParameter(format!("drive damping {} must be non-negative", self.damping)));
        }
        if !self.reference.is_finite() {
            return Err(Error::InvalidParameter("drive reference is not finite".into()));
        }
        match &self.profile {
            Some(p) => p.validate(),
            None => Ok(()),
        }
    }

    pub fn output(&self, q: f64, rate: f64, t: f64) -> f64 {
        -self.stiffness * (q - self.reference) - self.damping * rate + self.actuation(t)
    }

    pub fn actuation(&self, t: f64) -> f64 {
        self.profile.as_ref().map_or(0.0, |p| p.value(t))
    }

    pub fn potential(&self, q: f64) -> f64 {
        0.5 * self.stiffness * (q - self.reference).powi(2)
    }

    pub fn dissipation(&self, rate: f64) -> f64 {
        self.damping * rate * rate
    }

    pub fn is_free(&self) -> bool {
        self.stiffness == 0.0 && self.damping == 0.0 && self.profile.is_none()
    }
}
