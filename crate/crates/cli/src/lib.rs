//! Expression parsing for the `logdm` command line.

pub mod parse;
