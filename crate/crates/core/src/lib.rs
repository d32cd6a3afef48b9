//! Optimal selling to Poisson-arriving buyers when the seller is uncertain about an
//! aggregate state: commitment benchmark, opaque-market equilibrium, and a simulator.

pub mod cli;
pub mod commitment;
pub mod config;
pub mod equilibrium;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod numerics;
pub mod simulator;

pub use commitment::{exit_profile, CommitmentSolution, SolveOptions};
pub use equilibrium::{EquilibriumOutcome, EquilibriumSolution};
pub use error::{Error, Result};
pub use model::{validate, Environment, SignalModel, TypeModel, ValidationReport};
pub use simulator::{CutoffStrategyProfile, ProfileValue};
