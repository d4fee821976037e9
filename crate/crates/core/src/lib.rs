pub mod cli;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod model;
pub mod phase;
