//! Experiment harness for counterfactual risk minimization: synthetic
//! corpus generation, the supervised-to-bandit protocol, result tables,
//! and the statistics used to compare methods.

pub mod harness;
pub mod io;
pub mod report;
pub mod stats;
pub mod synth;
