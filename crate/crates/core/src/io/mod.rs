//! Configuration, random streams and result persistence.

pub mod config;
pub mod report;
pub mod stream;
