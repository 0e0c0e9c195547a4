//! Scenario files for the two-port multibody engine: a versioned TOML
//! schema, conversion to a [`twoport_core::SystemGraph`], result tables and
//! the `twoport` command line.

mod build;
pub mod cli;
mod config;
mod table;

pub use build::{build_system, BuildError};
pub use cli::run_cli;
pub use config::{
    parse_scenario, AnchorConfig, BodyConfig, ClosureConfig, DriveConfig, EndConfig, ExternalConfig, ExternalKind, Gain,
    Integration, Issue, JointConfig, JointKind, Metadata, OutputConfig, ProfileConfig, ProfileKind, ScenarioConfig,
    ScenarioErrors, WrenchFrame, SCHEMA_VERSION,
};
pub use table::{ResultTable, TableError, LEDGER_COLUMNS};
