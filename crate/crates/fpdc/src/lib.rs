//! # fpdc — Fokker-Planck density control for robotic swarms
//!
//! A numerical library and simulator for steering the spatial density of a
//! robotic swarm toward a target distribution while keeping a restricted
//! region empty of probability mass. The swarm density evolves under the
//! Fokker-Planck equation discretized with central finite differences on a
//! uniform 2D grid; safety and convergence are enforced through control
//! barrier / control Lyapunov constraints inside small convex QPs solved in
//! the control loop.
//!
//! Four controllers are provided:
//! - `Oc` — open-loop state-constrained optimal control (forward-backward
//!   sweep, static lookup table),
//! - `SvObc` — one spatial control field shared by all robots,
//! - `RvObc` — one velocity vector per robot,
//! - `RvObcV` — per-robot velocities with Voronoi-restricted functionals for
//!   near-constant scaling in swarm size.
//!
//! Start with the runnable programs under `examples/`, one per capability,
//! or the `fpdc` binary (`run`, `compare`, `verify` subcommands).

pub mod clf_cbf;
pub mod cli;
pub mod config;
pub mod controllers;
pub mod density;
pub mod error;
pub mod grid;
pub mod output;
pub mod qp;
pub mod sim;
pub mod verify;
pub mod voronoi;



pub use density::{DiffusionModel, SwarmState};
pub use error::Error;
pub use grid::{Boundary, GridSpec, Operators, ScalarField, SparseOperator, VectorField};




/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
