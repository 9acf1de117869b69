//! Supremum moments of fractional Brownian motion.
//!
//! `K_T(H, gamma) = E[sup_{t in [0,T]} |B_H(t)|^gamma]`: exact values at
//! `H = 1/2` and `H = 1`, comparison bounds for every `H`, analytic
//! supremum distributions for Brownian motion, and an exact-in-law
//! Monte-Carlo estimator used to check all of them.

pub mod cli;
pub mod closed_form;
pub mod error;
pub mod fbm_sampler;
pub mod mc_estimator;
pub mod quadrature;
pub mod rng;
pub mod special_functions;
pub mod stats;
pub mod sup_distribution;

pub use error::{Error, Result};
