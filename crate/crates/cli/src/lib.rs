//! Command-line companion to `expmix-core`: density and variable spec
//! parsing, report formatting, the verification suite, and the subcommand
//! report builders.

pub mod commands;
pub mod report;
pub mod spec;
pub mod suite;
