//! Command-line front end: configuration-driven optimization runs,
//! Monte-Carlo sweeps and plot emission.

pub mod commands;
pub mod manifest;
pub mod plot;
