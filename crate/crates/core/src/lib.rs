//! Simulation and analysis of an SIRS epidemic model with asymptomatic
//! infection and two-season periodic transmission.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters, states, the seasonal schedule and the vector field.
//! - [`smallmat`]: 2x2/3x3 matrix exponential, eigenvalues, Routh-Hurwitz.
//! - [`flow`]: season-by-season integration, trajectories and the period map.
//! - [`reproduction`]: linearisation at the disease-free state, the monodromy
//!   matrix and the basic reproduction number computed three ways.
//! - [`equilibria`]: closed-form equilibria of the constant-transmission model
//!   and their stability.
//! - [`analysis`]: Lyapunov functions and simulation-based checks of
//!   extinction, persistence and global stability.
//! - [`cli`]: scenario files and the `sirs` command-line tool.

pub mod analysis;
pub mod cli;
pub mod equilibria;
pub mod flow;
pub mod model;
pub mod reproduction;
pub mod smallmat;

pub use model::{beta_at, rhs, rhs_full4, validate, ModelParams, Season, SeasonLabel, State};
