//! File IO, HTTP backends and the command line around `chartnl-core`.

pub mod cli;
pub mod config;
pub mod http;
pub mod io;
pub mod mock;
pub mod workflow;

pub use chartnl_core as core;
