//! Randomized construction of Steiner triple systems and Latin squares inside
//! sparse random triple sets, with an exact-cover oracle and a Monte-Carlo
//! harness for thresholds and spread.

pub mod absorber;
pub mod experiments;
pub mod graph;
pub mod latin;
pub mod nibble;
pub mod oracle;
pub mod pipeline;
pub mod sampling;
pub mod vortex;
