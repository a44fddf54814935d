//! Experiment runner for the `delaychain` library: configuration, seeded
//! parallel trials, statistical comparison with the analytic bounds, and
//! CSV output.

pub mod config;
pub mod experiment;
pub mod figures;
pub mod oracle_suite;
pub mod replay;
pub mod stats;

/// Process exit codes.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const STATISTICAL_FAIL: u8 = 1;
    pub const CONTRADICTION: u8 = 2;
    pub const CONFIG_ERROR: u8 = 3;
}
