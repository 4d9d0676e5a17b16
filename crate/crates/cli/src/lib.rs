//! Batch front end for the thermolind library.

pub mod config;
pub mod tasks;
