//! Command line front end and session server for RiverEcho.

pub mod bench;
pub mod commands;
pub mod config;
pub mod server;

pub use commands::run;
pub use config::ServerConfig;
