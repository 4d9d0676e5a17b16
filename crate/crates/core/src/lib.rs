//! Thermal Lindbladian construction, detailed-balance checks and error bounds
//! for open quantum systems weakly coupled to a Gaussian bath.

pub mod bath;
pub mod benchmark;
pub mod dbcheck;
pub mod dynamics;
pub mod error;
pub mod errorbudget;
pub mod generators;
pub mod models;
pub mod opcore;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
