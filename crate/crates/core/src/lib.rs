//! Over-the-air realization of a fully connected layer through a multi-hop
//! amplify-and-forward relay chain.
//!
//! A multi-antenna transmitter precodes the layer input, `L` serial groups of
//! single-antenna relays amplify and forward it, and a multi-antenna receiver
//! combines the result. The precoder, combiner and relay gains are fitted by
//! alternating optimization so that the end-to-end map imitates a target
//! weight matrix while keeping the propagated noise small.
//!
//! - [`channel`]: topology, pathloss and fading, channel realizations.
//! - [`system`]: effective channel, noise covariance, objective, forward pass.
//! - [`solver`]: block updates and the alternating optimization loop.
//! - [`eval`]: imitation metrics, synthetic classification task, Monte-Carlo sweeps.
//! - [`io`]: JSON matrix files and CSV outputs.
//! - [`config`]: experiment configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod par;
pub mod random;
pub mod solver;
pub mod system;

pub use error::{Error, Result};
