//! Library half of the `dualmp` command-line tool: the run configuration,
//! profile files and the `check`, `solve`, `verify` and `rates` commands.

pub mod commands;
pub mod config;
pub mod profile;

pub use commands::Exit;
pub use config::RunConfig;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
