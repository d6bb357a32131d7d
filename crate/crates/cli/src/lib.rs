//! Library surface of the experiment runner, exposed for integration tests.

pub mod config;
pub mod csvout;
pub mod manifest;
pub mod runner;
