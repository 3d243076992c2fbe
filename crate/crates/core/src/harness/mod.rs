//! Configuration, orchestration, persistence, and the verification and
//! rate-sweep entry points used by the CLI.

pub mod config;
pub mod rate;
pub mod run;
pub mod verify;
