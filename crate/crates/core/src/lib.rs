//! Phase-field fracture in periodically perforated media: periodic cell
//! problems and the effective tensor they produce, an alternate-minimization
//! quasi-static evolution for the homogenized model, and a fine-scale solver on
//! the perforated domain used to validate it.

pub mod cell;
pub mod error;
pub mod fem;
pub mod finescale;
pub mod fracture;
pub mod geometry;
pub mod harness;
pub mod io;

pub use error::{Error, Result};
