//! Library side of the `adgraph` command-line tool: the infix expression
//! front end and the subcommand implementations.

pub mod commands;
pub mod error;
pub mod expr;

pub use commands::{execute, Cli};
pub use error::CliError;
