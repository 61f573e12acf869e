//! The `voxd` operator tool: configuration, adapter wiring and subcommands.

pub mod app;
pub mod config;
pub mod remote;
