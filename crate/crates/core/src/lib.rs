//! Self-stabilizing ρ-wavelets, layer clocks and ρ-local resource
//! allocation, simulated on anonymous graphs under pluggable daemons.

pub mod causality;
pub mod infimum;
pub mod kernel;
pub mod layerclock;
pub mod lra;
pub mod par;
pub mod scenario;
pub mod unison;
pub mod topology;
