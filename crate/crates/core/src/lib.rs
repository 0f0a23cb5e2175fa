//! Quantum-walk approximate counting of marked states of reversible Markov
//! chains, collision counting on Johnson graphs, and the classical
//! baselines, with query accounting throughout.

pub mod classical;
pub mod collision;
pub mod counting;
pub mod engine;
pub mod error;
pub mod markov;
pub mod meter;
pub mod phase;
pub mod rng;
pub mod walk;

pub use error::{Error, Result};
