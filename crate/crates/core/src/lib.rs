//! Homogenization toolkit for the Helmholtz equation in domains perforated
//! by small Helmholtz resonators.

pub mod cell_problem;
pub mod cli;
pub mod config;
pub mod effective;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod fem;
pub mod mesh;
pub mod microscale;
pub mod verification;

pub use error::{Error, Result};
