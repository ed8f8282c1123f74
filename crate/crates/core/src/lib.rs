//! Operator learning with encoder–network–decoder surrogates for PDE
//! solution maps: grids and norms, spectral encoders, random input fields,
//! reference solvers, sparse ReLU networks, low-complexity operator chains,
//! and a reproducible experiment driver.

pub mod data;
pub mod encoders;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod network;
pub mod pde;
pub mod seeds;
pub mod structures;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction, NormKind};
