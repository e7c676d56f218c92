//! Front end for the lot-type design solver: instance files, the synthetic
//! instance generator and the subcommands of the `lotgen` binary.

pub mod commands;
pub mod generate;
pub mod io;

pub use commands::ExitStatus;
