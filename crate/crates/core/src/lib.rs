//! Structural causal models over finite domains and linear-Gaussian systems:
//! interventions, the back-door criterion, identification formulas with
//! brute-force interventional oracles, case-control simulation, do-calculus
//! rule checks and stratification diagnostics.

pub mod casecontrol;
pub mod cli;
pub mod diagnostics;
pub mod docalc;
pub mod error;
pub mod estimands;
pub mod examples;
pub mod exogenous;
pub mod gaussian;
pub mod graph;
pub mod identify;
pub mod model_io;
pub mod prob;
pub mod scm;

pub use error::{Error, Result};
