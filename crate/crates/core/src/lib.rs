//! Joint mode selection and resource allocation for D2D underlaid cellular
//! networks.
//!
//! The pipeline partitions transmission links into co-channel groups by
//! coloring an interference conflict graph, optimizes transmit powers inside
//! each group against ergodic Rayleigh-fading rates, chooses between direct
//! and base-station-relayed transmission for lone D2D pairs, and hands the
//! channels to the most valuable groups. Two comparison schemes and a
//! seeded Monte Carlo harness sit on top.

pub mod baselines;
pub mod config;
pub mod error;
pub mod mode;
pub mod par;
pub mod partition;
pub mod power;
mod quad;
pub mod rate;
pub mod sim;
pub mod topology;

pub use config::{AssignmentObjective, SolverParams, SystemConfig};
pub use error::{Error, Result};
pub use par::Execution;

pub use quad::integrate;
