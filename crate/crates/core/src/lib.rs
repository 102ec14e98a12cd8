//! Simulation and certification toolkit for alignment dynamics: the
//! Cucker-Smale agent system, Euler alignment equations on periodic grids,
//! and the kinetic alignment equation, together with threshold certificates
//! and runtime monitors.

pub mod agents;
pub mod config;
pub mod diagnostics;
pub mod euler;
pub mod kernels;
pub mod kinetic;
pub mod presets;
pub mod runner;
pub mod thresholds;
