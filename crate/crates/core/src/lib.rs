//! Joint transmit beamforming and IRS phase-shift design for SINR-constrained
//! power minimization in a multiuser MISO downlink.
//!
//! The main method is a successive convex approximation ([`sca`]) that
//! updates beamformers and phases together by solving a second-order cone
//! program per iteration. An alternating baseline with semidefinite
//! relaxation lives in [`baselines`], and [`harness`] runs Monte-Carlo
//! comparisons.

pub mod baselines;
pub mod bounds;
pub mod channel;
pub mod error;
pub mod harness;
pub mod sca;
pub mod sysmodel;
mod textio;

pub use error::{Error, Result};
