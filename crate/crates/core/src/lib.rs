//! Variational consistent-histories simulator.
//!
//! Two independent routes to the decoherence functional of a family of
//! histories: direct class-operator products ([`histories`]) and a branched
//! system-ancilla state prepared by a record-keeping sweep ([`branchstate`]).
//! Costs built from purities of the branched state ([`estimators`]) drive a
//! derivative-free search over projector families ([`vchloop`]), and
//! [`report`] turns a solution into probabilities with consistency bounds.

pub mod branchstate;
pub mod error;
pub mod estimators;
pub mod histories;
pub mod models;
pub mod qmath;
pub mod report;
pub mod vchloop;
pub mod verify;

pub use error::{Error, Result};
