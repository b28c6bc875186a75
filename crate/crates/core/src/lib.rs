//! Stochastic-geometry analysis of an underlay cognitive radio network.
//!
//! Primary and secondary transmitter–receiver pairs are scattered as
//! Poisson point processes, access the channel ALOHA-style and see Rayleigh
//! fading over a non-singular path loss. The crate provides
//!
//! - closed-form connection probabilities ([`analytic`]) with a quadrature
//!   oracle for the interference Laplace transforms,
//! - a seeded Monte Carlo engine ([`montecarlo`]) that checks them,
//! - the per-transmitter choice of secondary power and access probability
//!   that maximises the spatial density of successful secondary links while
//!   protecting the primary tier ([`optimizer`]),
//! - a finite-network experiment that plans every secondary transmitter
//!   independently and counts successes over fading resource blocks
//!   ([`experiment`]).

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod quadrature;

pub use error::{Error, Result};
pub use model::{Scenario, Strategy, Tier};
