//! File-based pipeline around `jeaudit-core` and the read-only HTTP API
//! that serves a latent export.

pub mod commands;
pub mod server;

pub use commands::{run, Cli, Command};
pub use server::{router, serve};
