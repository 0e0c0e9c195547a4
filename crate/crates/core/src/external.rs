//! External wrench sources bound to points of bodies.

use crate::drive::{bracket, check_times};
use crate::{Error, Result, Vec3, Vec6};

#[derive(Debug, Clone, PartialEq)]
pub enum WrenchSource {
    /// Force and torque fixed in the inertial frame.
    Inertial { force: Vec3, torque: Vec3 },
    /// Force and torque fixed in the body frame.
    Body { force: Vec3, torque: Vec3 },
    /// Piecewise-linear `[F; T]` samples, held constant outside the table.
    Table {
        times: Vec<f64>,
        values: Vec<Vec6>,
        inertial: bool,
    },
}

impl WrenchSource {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            WrenchSource::Inertial { force, torque } | WrenchSource::Body { force, torque } => {
                if !finite(force.as_slice()) || !finite(torque.as_slice()) {
                    return Err(Error::InvalidParameter("external wrench is not finite".into()));
                }
                Ok(())
            }
            WrenchSource::Table { times, values, .. } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::InvalidParameter(format!(
                        "wrench table needs matching non-empty columns ({} times, {} rows)",
                        times.len(),
                        values.len()
                    )));
                }
                if !values.iter().all(|v| finite(v.as_slice())) {
                    return Err(Error::InvalidParameter("wrench table has non-finite entries".into()));
                }
                check_times(times)
            }
        }
    }

    /// Wrench at time `t` and whether it is projected in the inertial frame.
    pub fn value(&self, t: f64) -> (Vec6, bool) {
        match self {
            WrenchSource::Inertial { force, torque } => (twoport_spatial::stack(force, torque), true),
            WrenchSource::Body { force, torque } => (twoport_spatial::stack(force, torque), false),
            WrenchSource::Table { times, values, inertial } => {
                let (i, w) = bracket(times, t);
                let v = if w == 0.0 {
                    values[i]
                } else {
                    values[i] * (1.0 - w) + values[i + 1] * w
                };
                (v, *inertial)
            }
        }
    }

    /// A constant inertial force derives from the potential `−F·r`.
    pub fn conservative_force(&self) -> Option<Vec3> {
        match self {
            WrenchSource::Inertial { force, .. } => Some(*force),
            _ => None,
        }
    }
}

/// A wrench source applied at a named point of a block's body.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalWrench {
    pub name: String,
    pub point: String,
    pub source: WrenchSource,
}

impl ExternalWrench {
    pub fn new(name: impl Into<String>, point: impl Into<String>, source: WrenchSource) -> Result<Self> {
        source.validate()?;
        Ok(ExternalWrench {
            name: name.into(),
            point: point.into(),
            source,
        })
    }
}
