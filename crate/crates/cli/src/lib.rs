//! Library backing the `mfa` binary; the command implementations live here
//! so integration and acceptance tests can drive them directly.

pub mod commands;
pub mod error;
pub mod settings;
