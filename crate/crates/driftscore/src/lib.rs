//! Unbiased score estimation for partially observed diffusions.
//!
//! The setting: a hidden diffusion dX = b(X) dt + sigma(X) dW observed
//! through a noisy integrated channel dY = h(X) dt + dB, with the model
//! parameters theta entering the drifts. The score (the gradient of the
//! log-likelihood of a fixed observation record with respect to theta) has
//! no closed form outside the linear-Gaussian case, and naive particle
//! estimates of it carry both a time-discretization bias and a burn-in
//! bias. This crate removes both in expectation:
//!
//! - Euler discretizations on dyadic grids ([`lattice`], [`dynamics`]) turn
//!   the continuous problem into a family of state-space models indexed by
//!   a level l with step size 2^-(l+3).
//! - Conditional particle sweeps and their couplings ([`chains`], driven by
//!   [`couplings`] and weighted per [`weights`]) give lag-coupled chains on
//!   path space whose meeting times are almost surely finite.
//! - Debiased increments ([`estimators::psi_zero`], [`estimators::psi_level`])
//!   combine a fixed averaging window with telescoping corrections up to
//!   the meeting time, so each term is an exactly unbiased estimate of a
//!   fixed-level score (or of an adjacent-level difference).
//! - Randomizing the level ([`estimators::LevelDistribution`]) and
//!   reweighting by pmf or survival masses removes the discretization bias
//!   as well; [`sgd`] turns the resulting gradient oracle into parameter
//!   recovery by log-reparameterized ascent.
//!
//! Every random quantity is drawn from a labeled stream tree ([`rng`]), so
//! any sub-computation can be replayed in isolation and results do not
//! depend on scheduling. The crate is `no_std` (with `alloc`); file formats,
//! parallel drivers, and the command-line interface live in the companion
//! binary crate.
//!
//! A minimal end-to-end run:
//!
//! ```
//! use driftscore::estimators::{
//!     averaged_estimate, EstimatorKind, EstimatorParams, LevelDistribution,
//! };
//! use driftscore::lattice::simulate_data;
//! use driftscore::models::{Model, OrnsteinUhlenbeck};
//! use driftscore::rng::{self, StreamCtx};
//!
//! let model = OrnsteinUhlenbeck::default();
//! let theta = model.theta_default();
//! let data = simulate_data(&model, &theta, 4, 2, 7).unwrap();
//! let dist = LevelDistribution::Empirical { l_max: 2 };
//! let params = EstimatorParams { n_particles: 32, ..Default::default() };
//! let ctx = StreamCtx::root(7).child(rng::DOMAIN_ESTIMATE);
//! let est = averaged_estimate(
//!     &model, &theta, &data.record, &dist, &params,
//!     EstimatorKind::CoupledSum, 4, ctx,
//! )
//! .unwrap();
//! assert_eq!(est.value.len(), 3);
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chains;
pub mod couplings;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod rng;
pub mod sgd;
pub mod stats;
pub mod weights;

pub use error::{Error, Result};
