//! Test-only helpers: brute-force oracles that recompute results along a
//! different route than the library, and the synthetic scenarios used by
//! the integration and acceptance suites.

pub mod oracle;
pub mod scenario;
