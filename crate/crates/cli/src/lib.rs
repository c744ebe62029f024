//! Command-line front end and live steering API for the therapy-edge simulator.

pub mod api;
pub mod commands;
pub mod live;
