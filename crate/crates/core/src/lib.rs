//! Deterministic multi-vehicle autonomous-racing simulation framework.
//!
//! The crate is organized along the pipeline it simulates:
//!
//! - [`track`]: closed-circuit geometry, curvature and Frenet conversion
//! - [`dynamics`]: dual-track Pacejka plant, point-mass limits, integration
//! - [`prediction`]: uni-modal opponent prediction (physics + rail blend)
//! - [`planning`]: spatio-temporal lattice planner and velocity profiler
//! - [`control`]: feedforward + gain-scheduled LQ tracking with tightened limits
//! - [`sim`]: lock-stepped multi-agent loop, perception model and logging

pub mod control;
pub mod dynamics;
pub mod geom;
pub mod planning;
pub mod prediction;
pub mod sim;
pub mod track;

pub use dynamics::{braking_distance, delay_distance, kph_to_mps};
pub use track::{FrenetPose, TrackModel};
