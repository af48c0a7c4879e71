//! Minimum-power transmit beamforming for integrated sensing and
//! communication.
//!
//! A base station with a uniform linear array serves single-antenna users
//! while shaping its transmit beampattern toward radar targets. The design
//! problem is relaxed to a semidefinite program and then driven back to
//! rank-one beamformers by iterative rank minimization:
//!
//! - [`scene`]: array geometry, channels and the desired beampattern.
//! - [`metrics`]: power, SINR, rate and beampattern evaluation.
//! - [`sdp`]: problem builder and interior-point solver.
//! - [`formulation`]: the relaxed and penalized beamforming programs.
//! - [`irm`]: the rank-minimization loop and beamformer extraction.
//! - [`experiments`]: scenario runs, sweeps and file outputs.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod formulation;
pub mod io;
pub mod irm;
pub mod linalg;
pub mod metrics;
pub mod scene;
pub mod sdp;
pub mod units;

pub use error::{Error, Result};
