//! Library half of the `distemb` command-line tool. Every subcommand writes
//! its human-readable output to a caller-supplied sink so it can be tested
//! without spawning a process.

pub mod args;
pub mod budget;
pub mod commands;
pub mod error;
pub mod fit;
pub mod source;
pub mod table;

use std::io::Write;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

/// Run one parsed invocation.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Decompose(a) => commands::decompose::run(&a, out),
        Command::Eval(a) => commands::eval::run(&a, out),
        Command::Pipeline(a) => commands::pipeline::run(&a, out),
        Command::Compare(a) => commands::compare::run(&a, out),
        Command::Gradcheck(a) => commands::gradcheck::run(&a, out),
    }
}
