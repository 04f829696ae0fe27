//! Adaptation and learning over multi-agent networks, synchronous and
//! asynchronous.
//!
//! The crate provides the building blocks for studying distributed
//! stochastic-gradient learners that process streaming data:
//!
//! - [`costs`]: mean-square-error and regularized logistic risks with exact
//!   first/second-order information, streaming-sample gradient approximations,
//!   and the gradient-noise model they induce.
//! - [`stepsize`]: random step-size processes (constant, Bernoulli on-off,
//!   scaled Beta) with exact moments and the effective step-size that governs
//!   asynchronous steady-state behavior.
//! - [`topology`]: left-stochastic combination policies, random on-off link
//!   models, their mean/Kronecker-covariance moments, primitivity tests, and
//!   Perron-vector machinery.
//! - [`strategies`]: the learning recursions themselves: single-agent,
//!   centralized fusion, consensus, CTA/ATC diffusion, the unifying
//!   three-matrix form, enlarged gradient exchange, and classical consensus
//!   averaging.
//! - [`theory`]: closed-form steady-state MSD / excess-risk / convergence-rate
//!   predictors and mean-error stability matrices.
//! - [`sim`]: a seeded, reproducible Monte Carlo engine that estimates
//!   learning curves and steady-state metrics and compares them against the
//!   theory predictors.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature only toggles `std::error::Error` impls and float intrinsics.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod costs;
pub mod error;
pub mod linalg;
pub mod sim;
pub mod stepsize;
pub mod strategies;
pub mod theory;
pub mod topology;

pub use error::{Error, Result};
pub use linalg::Mat;
