//! Bosonic rotation codes in a truncated Fock space.
//!
//! The crate builds number-phase codewords (cat, binomial, Pegg-Barnett,
//! squeezed cat, 0N), applies the diagonal gate set and loss + dephasing
//! noise, models phase measurements, and evaluates teleportation-based
//! error correction as a logical qubit channel.

pub mod channels;
pub mod codes;
pub mod ec;
pub mod error;
pub mod fock;
pub mod gates;
pub mod measurements;
pub mod special;

pub use error::{Error, Result};
pub use fock::{CMat, CVec, FockOperator, FockVector, ModeSpace, TwoModeVector, C64};

/// Library version, part of every result-cache key.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
