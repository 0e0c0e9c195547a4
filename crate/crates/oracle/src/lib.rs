//! Reference implementations for validating the multibody engine.
//!
//! [`MinimalModel`] describes a tree of rigid links in minimal coordinates and
//! derives accelerations from finite-difference Lagrange equations. It only
//! uses the rotation primitives of `twoport-spatial`, never the engine's block
//! or assembly code. [`AnalyticCase`] holds closed-form results for classic
//! systems.

mod analytic;
mod model;

pub use analytic::{analytic_check, complete_elliptic_k, AnalyticCase, CheckOutcome};
pub use model::{
    integrate_rk4, oracle_accel, oracle_mass_matrix, Connection, JointForce, Link, LinkBody, Load, LoadFrame,
    MinimalModel, OracleEnergy, OracleTrajectory,
};

pub use twoport_spatial::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("coordinate vector has length {found}, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("mass matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("Euler chart singular at middle angle {0} rad")]
    ChartSingularity(f64),
}

pub type Result<T> = std::result::Result<T, OracleError>;
