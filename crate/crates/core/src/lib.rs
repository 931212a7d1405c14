//! Uplink spectral and energy efficiency of extra-large scale MIMO arrays
//! whose users only see part of the aperture (their visibility region).
//!
//! The crate covers channel statistics, subarray combiners, Monte-Carlo and
//! closed-form rates for MRC and LMMSE receivers, greedy user and subarray
//! scheduling, and a hardware power model.

pub mod channel;
pub mod closed_form;
pub mod combiner;
pub mod config;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod output;
pub mod receivers;
pub mod rng;
pub mod scenario;
pub mod scheduling;

pub use error::{Error, Result};
