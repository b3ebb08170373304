//! Sweep harness for rotcode: config parsing, parallel evaluation, a
//! content-addressed result cache and deterministic CSV output.

pub mod cache;
pub mod config;
pub mod experiments;
pub mod rows;
