//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod adversary;
pub mod envgen;
pub mod grammar;
pub mod metrics;
pub mod scenarios;
pub mod search;
