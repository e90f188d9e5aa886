//! Simulator of a renewable-connected EV charging station together with a
//! tabular Q-learning controller that allocates hourly charging capacity to
//! maximize station revenue.
//!
//! The crate is organized along the moving parts of the problem:
//!
//! - [`domain`]: station value types and the user-type pricing curves.
//! - [`exogenous`]: renewable and grid-price signals, their ingestion,
//!   synthesis and discretization.
//! - [`env`]: the station MDP (arrivals, admission, action enumeration,
//!   reward, transition).
//! - [`learner`]: state encoding, the sparse Q-table, schedules and the
//!   training loop.
//! - [`policies`]: random / myopic / learned decision policies behind one
//!   contract.
//! - [`harness`]: experiment configuration, paired policy comparison, the
//!   value-iteration oracle and report generation.

pub mod domain;
pub mod env;
pub mod error;
pub mod exogenous;
pub mod harness;
pub mod learner;
pub mod policies;

pub use error::{Error, Result};
