//! Configuration, artifacts and invariant checks behind the `funnelback`
//! binary.

pub mod config;
pub mod csvlog;
pub mod plot;
pub mod report;
pub mod verify;
