//! Simulation engine for a continuous-time nearest-neighbour polymer on the
//! integer lattice, weighted by a space-time Brownian environment.
//!
//! The crate provides:
//!
//! * a lazily refined, seed-deterministic Brownian environment ([`env`]),
//! * a forward/backward lattice solver for partition functions, Gibbs
//!   marginals, overlaps and favourite-point statistics ([`solver`]),
//! * exact continuous-time path samplers and Monte Carlo estimators
//!   ([`paths`], [`montecarlo`]),
//! * last-passage dynamic programming and jump-density rate functions
//!   ([`ground_state`]),
//! * small statistical utilities shared by the estimators and the check
//!   suites ([`stats`]).
//!
//! Everything random is a pure function of a 64-bit master seed, so replicas,
//! rescaled views and parallel workers reproduce identical values bit for bit.

pub mod enumeration;
pub mod env;
pub mod error;
pub mod ground_state;
pub mod kernel;
pub mod lattice;
pub mod montecarlo;
pub mod paths;
pub mod rng;
pub mod solver;
pub mod stats;

pub use env::{BrownianField, Environment, Rescaled};
pub use error::{Error, Result};
pub use kernel::StepKernel;
pub use lattice::{LatticeBox, SiteKey};
pub use paths::JumpPath;
pub use solver::{OverlapReport, SolverFields, SolverParams};
