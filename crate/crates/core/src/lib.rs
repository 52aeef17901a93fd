//! Federated learning over a lossy wireless uplink.
//!
//! The crate models an OFDMA cell in which users train a shared model with
//! full-batch gradient descent and upload it over Rayleigh-faded resource
//! blocks. Lost packets are simply left out of the weighted global average.
//!
//! - [`phy`]: rates, delays, packet error rates and energy per (user, RB, power).
//! - [`alloc`]: per-edge optimal power, Hungarian RB assignment and baselines.
//! - [`fl`]: datasets, local updates, lossy aggregation and the training loop.
//! - [`bound`]: curvature, gradient-bound fitting and the convergence bound.
//! - [`harness`]: configuration, experiment orchestration, sweeps and CSV export.

pub mod alloc;
pub mod bound;
pub mod error;
pub mod fl;
pub mod harness;
pub mod phy;
pub mod rng;

pub use alloc::{AllocationDecision, EdgeWeightMatrix};
pub use error::{Error, Result};
pub use fl::{Dataset, ModelVector, RoundOutcome, TrainingRun};

pub use phy::{FadingExpectation, LinkModel, NetworkParams, UserProfile};
