//! Problem-file parsing, certificate output and the self-check suites of the
//! `mw1` command.

pub mod check;
pub mod problem;
pub mod report;
