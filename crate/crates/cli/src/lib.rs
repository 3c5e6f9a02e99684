//! Config-driven front end for the qfolio engine. The command functions
//! live here (not in `main`) so integration tests can call them directly.

pub mod commands;
pub mod manifest;
pub mod synth;
