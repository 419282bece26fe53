//! Lane-change planning for selfish automated vehicles.
//!
//! Each vehicle solves a hybrid MPC problem whose logic rules (safety
//! distance, free-space agreement, lateral indicator rule) are compiled into a
//! MILP. Vehicles are players of a potential game; a Gauss-Southwell sequence
//! of best responses reaches an ε-equilibrium every planning round.
//!
//! - [`mld_model`]: vehicle dynamics, parameters and geometry.
//! - [`logic_compiler`]: MILP modeling layer and the per-vehicle compiler.
//! - [`milp_core`]: simplex and branch-and-bound.
//! - [`game`]: best responses, equilibrium checks and the Gauss-Southwell loop.
//! - [`harness`]: scenarios, simulation, safety monitors, traces.

pub mod game;
pub mod harness;
pub mod logic_compiler;
pub mod milp_core;
pub mod mld_model;
