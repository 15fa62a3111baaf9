//! Design and simulation of reflective varactor parametric frequency
//! selective limiters.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod hb;
pub mod io;
pub mod linalg;
pub mod linear;
pub mod model;
pub mod transient;

pub use error::{Error, Result};
