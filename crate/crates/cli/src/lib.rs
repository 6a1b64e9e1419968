//! Library surface of the CLI: configuration, expression parsing and
//! scenario orchestration, shared by the binary and the acceptance suite.

pub mod config;
pub mod error;
pub mod parser;
pub mod scenarios;
