//! Command-line front end: configuration files, spectrum output and the
//! structure report for the averaged CPT resonance.

pub mod config;
pub mod output;
pub mod run;
pub mod structure;
