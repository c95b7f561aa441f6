//! Joint design of UAV placement or trajectory, transmit beamforming and a
//! hybrid active/passive RIS profile for max-min downlink rates.
//!
//! [`static_opt`] handles a hovering UAV, [`mobile_opt`] a flying one with
//! TDMA scheduling. [`conic`] wraps the conic solver, [`bounds`] holds the
//! concave lower bounds used by the SCA steps and [`verify`] checks them.

pub mod bounds;
pub mod channel;
pub mod conic;
pub mod config;
pub mod evaluation;
pub mod harness;
pub mod mobile_opt;
pub mod oracle;
pub mod placement;
pub mod static_opt;
pub mod trace;
pub mod verify;
