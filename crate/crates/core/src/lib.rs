//! Reaction paths, classical trajectories and Bohmian trajectories on the
//! Müller-Brown surface, with trajectory-based reaction probabilities.
//!
//! Atomic units throughout; `hbar = 1` and the particle mass enters every
//! equation of motion explicitly (default 1836, a proton).

pub mod analysis;
pub mod bohmian;
pub mod classical;
pub mod cli;
pub mod config;
pub mod error;
pub mod fft2;
pub mod geometry;
pub mod io;
pub mod pes;
pub mod quantum;
pub mod reaction_path;
pub mod workflow;

pub use error::{Error, Result};
pub use geometry::{Sym2, Vec2};
pub use pes::{FrontierLine, PesModel, Potential};

/// Reduced Planck constant in atomic units.
pub const HBAR: f64 = 1.0;
