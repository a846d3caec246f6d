//! Spectral Fourier-Galerkin machinery for quasi-periodic solutions of the
//! forced Kirchhoff equation on T^d.

pub mod config;
pub mod decay_matrix;
pub mod diophantine;
pub mod error;
pub mod fourier;
pub mod grid;
pub mod kirchhoff;
pub mod measure_scan;
pub mod multiscale;
pub mod nash_moser;
pub mod reduction;

pub use error::{KqpError, Result};
pub use fourier::{s0_of, ModeBox, MultiIndex, TorusFunction, C64};
