//! Throughput of an energy-harvesting secondary user that shares a slotted
//! channel with a primary user.
//!
//! The secondary stores harvested energy in a finite buffer of packets and,
//! whenever the primary is idle, spends a random number of them according to
//! a state-dependent [`AccessPolicy`]. This crate evaluates the resulting
//! throughput in closed form, finds the best policy, and checks everything
//! against a slot-level simulation.
//!
//! * [`link`]: Rayleigh outage probabilities of both links.
//! * [`chain`]: the energy-buffer Markov chain and its stationary law.
//! * [`analytics`]: primary idle probability, energy and packet throughput.
//! * [`optimizer`]: exact enumeration, value iteration and randomized ascent.
//! * [`sim`]: Monte Carlo simulation with confidence intervals.
//! * [`experiment`]: configuration files, parameter sweeps and run manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod chain;
pub mod error;
pub mod experiment;
pub mod link;
pub mod optimizer;
pub mod params;
pub mod poisson;
pub mod policy;
pub mod sim;

pub use analytics::{evaluate, ThroughputReport};
pub use chain::EnergyChain;
pub use error::{Error, Result};
pub use params::{NoiseScaling, SystemParams};
pub use policy::AccessPolicy;
pub use sim::{SimConfig, SimStats};
